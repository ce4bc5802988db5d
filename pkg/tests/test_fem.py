import numpy as np
import pytest
import scipy.io
import scipy.sparse as sps
import sympy as sp

from bakhvalov_fem import fem
from bakhvalov_fem.checks import _constant_coefficients, check_element_matrices, coercivity_ratios
from bakhvalov_fem.export import write_matrix_market
from bakhvalov_fem.fem import (
    LOCAL_NODES,
    FEFunction,
    QuadratureOrderError,
    QuadratureRule,
    SolverError,
    assemble,
    element_matrices,
    reference_basis,
    solve,
)
from bakhvalov_fem.mesh import MeshConfig, build_mesh
from bakhvalov_fem.norms import _fe_at_quadrature as _fe_values
from bakhvalov_fem.problem import get_problem

EPS = np.finfo(float).eps
XS, YS = sp.symbols("x y", real=True)


def mesh(N=16, eps=1e-4):
    return build_mesh(MeshConfig(N, eps))


def symbolic_local(hx, hy):
    """Stiffness and mass on [0,hx]x[0,hy] by exact symbolic integration."""
    phis = []
    for a, b in LOCAL_NODES:
        px = XS / hx if a else 1 - XS / hx
        py = YS / hy if b else 1 - YS / hy
        phis.append(px * py)
    K = sp.zeros(4, 4)
    M = sp.zeros(4, 4)
    for p in range(4):
        for q in range(4):
            grad = sp.diff(phis[p], XS) * sp.diff(phis[q], XS) + sp.diff(phis[p], YS) * sp.diff(phis[q], YS)
            K[p, q] = sp.integrate(grad, (XS, 0, hx), (YS, 0, hy))
            M[p, q] = sp.integrate(phis[p] * phis[q], (XS, 0, hx), (YS, 0, hy))
    return K, M


# -- reference element ------------------------------------------------------------


def test_basis_kronecker_and_partition_of_unity(rng):
    for q, (a, b) in enumerate(LOCAL_NODES):
        for r, (c, d) in enumerate(LOCAL_NODES):
            assert reference_basis(q, c, d)[0] == (1.0 if q == r else 0.0)
    xi, eta = rng.uniform(0, 1, (2, 50))
    vals = np.array([reference_basis(q, xi, eta) for q in range(4)])
    np.testing.assert_allclose(vals[:, 0].sum(axis=0), 1.0, atol=4 * EPS)
    np.testing.assert_allclose(vals[:, 1].sum(axis=0), 0.0, atol=4 * EPS)
    np.testing.assert_allclose(vals[:, 2].sum(axis=0), 0.0, atol=4 * EPS)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 6])
def test_quadrature_exactness(order):
    rule = QuadratureRule.gauss(order)
    xi, eta, w = rule.tensor()
    assert w.sum() == pytest.approx(1.0, abs=4 * EPS)
    deg = 2 * order - 1
    for a in range(deg + 1):
        for b in range(deg + 1):
            assert np.sum(w * xi**a * eta**b) == pytest.approx(1.0 / ((a + 1) * (b + 1)), rel=1e-13)


def test_quadrature_order_validation():
    with pytest.raises(QuadratureOrderError):
        QuadratureRule.gauss(0)
    with pytest.raises(QuadratureOrderError):
        assemble(mesh(), get_problem("paper-s5", 1e-4)[0], QuadratureRule.gauss(1))


# -- element matrices against symbolic integration --------------------------------


def test_uniform_cell_stiffness_classical():
    h = sp.Rational(1, 7)
    K, M = symbolic_local(h, h)
    expected = sp.Matrix([[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]) / 6
    assert sp.simplify(K - expected) == sp.zeros(4, 4)
    assert sp.simplify(M - h**2 / 36 * sp.Matrix([[4, 2, 1, 2], [2, 4, 2, 1], [1, 2, 4, 2], [2, 1, 2, 4]])) == sp.zeros(4, 4)
    # diagonal 2/3, edge neighbour -1/6, diagonal neighbour -1/3
    assert K[0, 0] == sp.Rational(2, 3) and K[0, 1] == sp.Rational(-1, 6) and K[0, 2] == sp.Rational(-1, 3)


def test_assembled_local_matrices_match_symbolic():
    m = mesh(8, 1e-4)
    rule = QuadratureRule.gauss(2)
    Ks = element_matrices(m, _constant_coefficients(0.0), rule, epsilon=1.0)
    Ms = element_matrices(m, _constant_coefficients(1.0), rule, epsilon=0.0)
    for i, j in [(0, 0), (3, 1), (4, 4), (7, 2), (5, 7)]:
        hx, hy = sp.Float(m.hx[i], 30), sp.Float(m.hy[j], 30)
        K, M = symbolic_local(hx, hy)
        K = np.array(K.evalf(30), dtype=float)
        M = np.array(M.evalf(30), dtype=float)
        assert np.max(np.abs(Ks[i, j] - K)) <= 4 * EPS * np.max(np.abs(K))
        assert np.max(np.abs(Ms[i, j] - M)) <= 4 * EPS * np.max(np.abs(M))


def test_element_matrix_check_on_all_cells():
    assert check_element_matrices(16, 1e-6).passed


def test_convection_element_matrix_symbolic():
    # -b w_x v with b = 3 - x - y on one cell of a graded mesh
    m = mesh(8, 1e-4)
    cs, _ = get_problem("paper-s5", 1e-4)
    i, j = 4, 3
    x0, y0, hx, hy = (sp.Rational(m.x[i]), sp.Rational(m.y[j]), sp.Rational(m.hx[i]), sp.Rational(m.hy[j]))
    phis = []
    for a, b in LOCAL_NODES:
        px = (XS - x0) / hx if a else 1 - (XS - x0) / hx
        py = (YS - y0) / hy if b else 1 - (YS - y0) / hy
        phis.append(px * py)
    Ke = element_matrices(m, cs, QuadratureRule.gauss(3), epsilon=0.0)[i, j]
    for p in range(4):
        for q in range(4):
            expr = -(3 - XS - YS) * sp.diff(phis[q], XS) * phis[p] + 2 * phis[q] * phis[p]
            ref = float(sp.integrate(expr, (XS, x0, x0 + hx), (YS, y0, y0 + hy)))
            assert Ke[p, q] == pytest.approx(ref, rel=1e-12, abs=1e-15)


# -- global matrix ----------------------------------------------------------------


def test_sparsity_pattern():
    m = mesh(16)
    A, F = assemble(m, get_problem("paper-s5", 1e-4)[0])
    n = (m.N - 1) ** 2
    assert A.shape == (n, n) and F.shape == (n,)
    assert np.max(np.diff(A.indptr)) <= 9
    P = (A != 0).astype(int)
    assert (P - P.T).nnz == 0


def test_pure_diffusion_rows_sum_to_zero():
    m = mesh(16)
    A, _ = assemble(m, _constant_coefficients(0.0), epsilon=1.0)
    N = m.N
    k = np.arange(A.shape[0])
    i, j = k % (N - 1) + 1, k // (N - 1) + 1
    away = (i > 1) & (i < N - 1) & (j > 1) & (j < N - 1)
    rows = np.asarray(A.sum(axis=1)).ravel()
    scale = np.abs(A).max()
    assert np.max(np.abs(rows[away])) <= 64 * EPS * scale


def test_lexicographic_ordering():
    m = mesh(8)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((m.N - 1) ** 2)
    v = FEFunction.from_interior(m, w)
    # k = (i-1) + (j-1)(N-1)
    assert v.coeffs[3, 2] == w[(3 - 1) + (2 - 1) * (m.N - 1)]
    np.testing.assert_array_equal(v.interior(), w)
    assert v.in_VN()


def test_assembly_is_deterministic():
    m = mesh(32, 1e-6)
    cs, _ = get_problem("paper-s5", 1e-6)
    A1, F1 = assemble(m, cs)
    A2, F2 = assemble(m, cs)
    assert np.array_equal(A1.data, A2.data) and np.array_equal(A1.indices, A2.indices)
    assert np.array_equal(F1, F2)


def test_coercivity_probe(rng):
    for eps, N in [(1e-4, 16), (1e-8, 32)]:
        cs, _ = get_problem("paper-s5", eps)
        r = coercivity_ratios(mesh(N, eps), cs, rng, 100)
        # a(v, v) >= eps |v|_1^2 + gamma ||v||^2 >= min(1, gamma) ||v||_eps^2
        assert r.min() >= 1.0 - 1e-10


# -- solver -----------------------------------------------------------------------


def test_identity_system():
    F = np.arange(1.0, 6.0)
    np.testing.assert_allclose(solve(sps.identity(5, format="csr"), F), F)


def test_zero_rhs():
    assert np.all(solve(sps.identity(4, format="csr"), np.zeros(4)) == 0)


@pytest.mark.parametrize("method", ["bicgstab", "banded", "direct"])
def test_manufactured_vector(method, rng):
    m = mesh(16, 1e-4)
    A, _ = assemble(m, get_problem("paper-s5", 1e-4)[0])
    w_star = rng.standard_normal(A.shape[0])
    tol = 1e-12
    w = solve(A, A @ w_star, tol, method)
    assert np.linalg.norm(w - w_star) <= 10 * tol * np.linalg.norm(w_star)
    assert np.linalg.norm(A @ w - A @ w_star) <= tol * np.linalg.norm(A @ w_star)


def test_solver_residual_contract():
    m = mesh(32, 1e-6)
    A, F = assemble(m, get_problem("paper-s5", 1e-6)[0])
    for method in ("bicgstab", "banded", "direct"):
        w = solve(A, F, 1e-12, method)
        assert np.linalg.norm(A @ w - F) <= 1e-12 * np.linalg.norm(F)


def test_solver_failure_reports_residual(monkeypatch):
    A = sps.csr_matrix(np.diag([1.0, 2.0, 3.0]))
    monkeypatch.setattr(fem.spla, "spsolve", lambda A, F: np.zeros_like(F))
    with pytest.raises(SolverError) as info:
        solve(A, np.ones(3), method="direct")
    assert info.value.residual == pytest.approx(1.0)


def test_unknown_method():
    with pytest.raises(ValueError):
        solve(sps.identity(3, format="csr"), np.ones(3), method="cg")
    with pytest.raises(ValueError):
        solve(sps.identity(3, format="csr"), np.ones(3), tol=0.0)


def test_galerkin_orthogonality(rng):
    """a(u^N, v) = (f, v) for random v, with both sides evaluated cell by cell."""
    eps, tol = 1e-6, 1e-12
    m = mesh(32, eps)
    cs, _ = get_problem("paper-s5", eps)
    A, F = assemble(m, cs)
    uN = FEFunction.from_interior(m, solve(A, F, tol))
    rule = QuadratureRule.gauss(4)
    X, Y, W = fem.cell_quadrature(m, rule)
    u, ux, uy = _fe_values(uN, rule)
    f = cs.f(X, Y)
    f_norm = np.sqrt(np.sum(f**2 * W))
    for _ in range(20):
        v = FEFunction.from_interior(m, rng.standard_normal((m.N - 1) ** 2))
        vv, vx, vy = _fe_values(v, rule)
        a = np.sum((eps * (ux * vx + uy * vy) - cs.b(X, Y) * ux * vv + cs.c(X, Y) * u * vv) * W)
        fv = np.sum(f * vv * W)
        v_eps = np.sqrt(np.sum((eps * (vx**2 + vy**2) + vv**2) * W))
        assert abs(a - fv) <= 10 * tol * f_norm * v_eps


# -- FE functions -----------------------------------------------------------------


def test_fe_function_nodes_and_arithmetic(rng):
    m = mesh(8)
    c = rng.standard_normal((9, 9))
    v = FEFunction(m, c)
    X, Y = m.node_grid()
    np.testing.assert_array_equal(v(X, Y), c)
    w = 2.0 * v - v
    np.testing.assert_allclose(w.coeffs, c)
    assert not v.in_VN()
    with pytest.raises(ValueError):
        v + FEFunction.zeros(mesh(8))
    with pytest.raises(ValueError):
        FEFunction(m, np.zeros((3, 3)))


def test_fe_gradient_of_bilinear(rng):
    m = mesh(8)
    X, Y = m.node_grid()
    v = FEFunction(m, 1 + 2 * X + 3 * Y + 4 * X * Y)
    x, y = rng.uniform(0, 1, (2, 30))
    np.testing.assert_allclose(v(x, y), 1 + 2 * x + 3 * y + 4 * x * y, rtol=1e-12)
    gx, gy = v.gradient(x, y)
    np.testing.assert_allclose(gx, 2 + 4 * y, rtol=1e-9)
    np.testing.assert_allclose(gy, 3 + 4 * x, rtol=1e-9)


def test_matrix_market_dump(tmp_path):
    m = mesh(8)
    A, _ = assemble(m, get_problem("paper-s5", 1e-4)[0])
    path = tmp_path / "A.mtx"
    write_matrix_market(path, A, comment="test")
    B = scipy.io.mmread(str(path))
    assert abs(B - A).max() == 0.0
