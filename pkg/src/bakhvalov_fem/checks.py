"""Numerical verification suites.

Each ``check_*`` function runs one property or acceptance check and returns a
:class:`CheckResult` carrying the measured value, the threshold it was held
to, and pass/fail.  Randomised checks take a ``numpy.random.Generator`` so
runs are reproducible from a seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .fem import FEFunction, QuadratureRule, assemble, element_matrices
from .interpolation import (
    QE1_column,
    Rect,
    build_PiS,
    correction_matrix,
    integral_identities,
    lagrange_interpolate,
    solve_correction,
    CorrectionSystem,
)
from .mesh import MeshConfig, Region, build_mesh, lemma_constant_spread, region_masks, verify_mesh_lemmas, satisfies_assumptions
from .norms import ConvergenceReport, fitted_slope, max_abs_callable_vs_fe, norm_callable_vs_fe, norm_fe
from .problem import CoefficientSet, Polynomial2D, get_problem, validate_decomposition_bounds
from .reference import ERROR_TOLERANCE, RATE_TOLERANCE, REFERENCE_ERRORS, REFERENCE_NS, REFERENCE_RATES, exponent_of

FULL_EPSILONS = tuple(10.0**-k for k in range(2, 9))
FULL_NS = (8, 16, 32, 64, 128, 256)
SLOPE_NS = (16, 32, 64, 128, 256)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: str
    detail: str = ""
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"{status}  {self.name}: {self.value:.4g} (need {self.threshold})"
        return out + (f"  [{self.detail}]" if self.detail else "")


def valid_grid(epsilons=FULL_EPSILONS, Ns=FULL_NS, sigma=2.5, beta=1.0):
    """(eps, N) pairs of the sweep that satisfy the mesh assumptions."""
    return [(e, N) for e in epsilons for N in Ns if satisfies_assumptions(N, e, sigma, beta)]


def _mesh(N, eps, sigma=2.5, beta=1.0):
    return build_mesh(MeshConfig(N, eps, sigma, beta))


# -- correction system ------------------------------------------------------------


def check_tridiagonal_bound(rng: np.random.Generator, trials: int = 1000, sizes=(3, 15, 127)) -> CheckResult:
    """max ||beta||_inf / (||tau||_inf / 2) and agreement with a dense solve."""
    worst_bound = 0.0
    worst_dense = 0.0
    for k in range(trials):
        n = sizes[k % len(sizes)]
        tau = rng.uniform(-1, 1, n) * 10.0 ** rng.uniform(-8, 2)
        sys_ = solve_correction(CorrectionSystem(np.arange(n), np.zeros(n), np.zeros(n), tau, np.zeros(n)))
        dense = scipy.linalg.solve(correction_matrix(n), -tau)
        worst_bound = max(worst_bound, np.max(np.abs(sys_.beta)) / (0.5 * np.max(np.abs(tau))))
        worst_dense = max(worst_dense, np.max(np.abs(sys_.beta - dense)) / np.max(np.abs(dense)))
    ok = worst_bound <= 1.0 and worst_dense <= 1e-12
    return CheckResult(
        "tridiagonal bound ||beta|| <= ||tau||/2", ok, worst_bound, "<= 1 and dense rel. diff <= 1e-12",
        f"dense rel. diff {worst_dense:.2e}", {"dense": worst_dense},
    )


def tau_sweep(epsilon: float = 1e-4, Ns=SLOPE_NS, rule: QuadratureRule | None = None):
    """||tau||_inf and max |S - Pi S| (sampled) and max |beta| per N."""
    _, ms = get_problem("paper-s5", epsilon)
    tau, sup, col = [], [], []
    for N in Ns:
        mesh = _mesh(N, epsilon)
        PiS, system = build_PiS(ms.S, mesh, rule, return_system=True)
        tau.append(float(np.max(np.abs(system.tau))))
        col.append(float(np.max(np.abs(system.beta))))
        sup.append(max_abs_callable_vs_fe(ms.S, PiS))
    return {"N": list(Ns), "tau": tau, "S-PiS": sup, "beta": col}


def check_tau_slope(epsilon: float = 1e-4, Ns=SLOPE_NS, sweep: dict | None = None) -> CheckResult:
    sweep = tau_sweep(epsilon, Ns) if sweep is None else sweep
    s = fitted_slope(sweep["N"], sweep["tau"])
    return CheckResult(f"||tau||_inf slope, eps={epsilon:g}", s >= 1.9, s, ">= 1.9", data=sweep)


# -- bilinear form ----------------------------------------------------------------


def coercivity_ratios(mesh, cs: CoefficientSet, rng: np.random.Generator, samples: int = 100) -> np.ndarray:
    """v^T A v / ||v||_eps^2 for random interior coefficient vectors v."""
    A, _ = assemble(mesh, cs)
    n = A.shape[0]
    out = np.empty(samples)
    for k in range(samples):
        w = rng.standard_normal(n)
        if k % 2:
            # smooth-ish fields as well as rough ones
            w = np.cumsum(np.cumsum(w.reshape(mesh.N - 1, mesh.N - 1), axis=0), axis=1).ravel()
        v = FEFunction.from_interior(mesh, w)
        out[k] = float(w @ (A @ w)) / norm_fe(v).energy ** 2
    return out


def check_coercivity(rng: np.random.Generator, epsilons=(1e-4, 1e-6, 1e-8), Ns=(16, 64, 256), samples: int = 100) -> CheckResult:
    """Smallest v^T A v / ||v||_eps^2 over a 3x3 sweep; theory gives min(1, gamma) = 1."""
    lows = {}
    for e in epsilons:
        cs, _ = get_problem("paper-s5", e)
        for N in Ns:
            lows[(e, N)] = float(coercivity_ratios(_mesh(N, e), cs, rng, samples).min())
    low = min(lows.values())
    bound = min(1.0, get_problem("paper-s5", epsilons[0])[0].gamma)
    ok = low >= bound * (1 - 1e-10)
    return CheckResult("coercivity v^T A v / ||v||_eps^2", ok, low, f">= {bound:g} (positive, uniform)", data=lows)


def reference_element_matrices(hx: float, hy: float, eps: float, c: float) -> np.ndarray:
    """Closed-form Q1 eps-Laplacian + c*mass on an hx x hy rectangle, nodes ordered (0,0),(1,0),(1,1),(0,1)."""
    K1 = np.array([[1.0, -1.0], [-1.0, 1.0]])
    M1 = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    # tensor index (a, b) -> local node; a is the x-node, b the y-node
    order = [(0, 0), (1, 0), (1, 1), (0, 1)]
    out = np.empty((4, 4))
    for p, (ap, bp) in enumerate(order):
        for q, (aq, bq) in enumerate(order):
            kx = K1[ap, aq] / hx * M1[bp, bq] * hy
            ky = M1[ap, aq] * hx * K1[bp, bq] / hy
            m = M1[ap, aq] * hx * M1[bp, bq] * hy
            out[p, q] = eps * (kx + ky) + c * m
    return out


def _constant_coefficients(c: float) -> CoefficientSet:
    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def const(x, y):
        return np.full(np.broadcast(x, y).shape, c)

    return CoefficientSet(zero, zero, const, zero, beta=0.0, gamma=c)


def check_element_matrices(N: int = 16, epsilon: float = 1e-4, order: int = 2) -> CheckResult:
    """Assembled local stiffness and mass matrices on every cell of a graded mesh vs closed form."""
    mesh = _mesh(N, epsilon)
    rule = QuadratureRule.gauss(order)
    worst = 0.0
    for eps_, c in ((1.0, 0.0), (0.0, 1.0)):
        Ke = element_matrices(mesh, _constant_coefficients(c), rule, epsilon=eps_)
        for i in range(N):
            for j in range(N):
                ref = reference_element_matrices(mesh.hx[i], mesh.hy[j], eps_, c)
                worst = max(worst, np.max(np.abs(Ke[i, j] - ref)) / np.max(np.abs(ref)))
    tol = 4 * np.finfo(float).eps
    return CheckResult("element stiffness/mass vs closed form", worst <= tol, worst, f"<= {tol:.2e} (4 ulp, relative)")


# -- integral identities ----------------------------------------------------------


def random_cubic(rng: np.random.Generator, center=(0.0, 0.0)) -> Polynomial2D:
    a = np.zeros((4, 4))
    for m in range(4):
        for n in range(4 - m):
            a[m, n] = rng.standard_normal()
    return Polynomial2D(a, center)


def check_integral_identities(rng: np.random.Generator, triples: int = 50, grid=None) -> CheckResult:
    """Both identities on random (cell, cubic w, bilinear v) triples, residual / term size."""
    grid = valid_grid(Ns=(16, 64, 256)) if grid is None else grid
    worst = 0.0
    for k in range(triples):
        e, N = grid[rng.integers(len(grid))]
        m = _mesh(N, e)
        i, j = (int(t) for t in rng.integers(0, N, 2))
        cell = Rect(m.x[i], m.x[i + 1], m.y[j], m.y[j + 1])
        w = random_cubic(rng, cell.center if k % 2 else (rng.uniform(), rng.uniform()))
        (la, ra), (lb, rb), (sa, sb) = integral_identities(w, rng.standard_normal(4), cell, with_scale=True)
        worst = max(worst, abs(la - ra) / sa, abs(lb - rb) / sb)
    return CheckResult("integral identities (cubic w, bilinear v)", worst <= 1e-10, worst, "<= 1e-10 relative to term size")


# -- mesh -------------------------------------------------------------------------


def check_mesh_lemmas(grid=None, alpha: float = 0.5) -> CheckResult:
    grid = valid_grid() if grid is None else grid
    reports = [verify_mesh_lemmas(_mesh(N, e), alpha) for e, N in grid]
    failed = [f"{c.name} (eps={r.epsilon:g}, N={r.N})" for r in reports for c in r.checks if not c.passed]
    spread = lemma_constant_spread(reports)
    worst = max(spread.values())
    ok = not failed and worst <= 4.0
    detail = f"{len(grid)} meshes, worst constant {max(spread, key=spread.get)}"
    if failed:
        detail += "; failed: " + ", ".join(failed[:3])
    return CheckResult("mesh lemmas, constant spread", ok, worst, "all hard checks pass, spread <= 4", detail, {"spread": spread})


# -- interpolation ----------------------------------------------------------------


def check_S_PiS_slope(epsilon: float = 1e-4, Ns=SLOPE_NS, sweep: dict | None = None) -> CheckResult:
    sweep = tau_sweep(epsilon, Ns) if sweep is None else sweep
    s = fitted_slope(sweep["N"], sweep["S-PiS"])
    return CheckResult(f"||S - Pi S||_inf slope, eps={epsilon:g}", s >= 1.9, s, ">= 1.9", data=sweep)


def E1_interpolation_errors(epsilon: float, Ns=SLOPE_NS) -> dict:
    _, ms = get_problem("paper-s5", epsilon)
    energy, l2 = [], []
    for N in Ns:
        mesh = _mesh(N, epsilon)
        n = norm_callable_vs_fe(ms.E1, lagrange_interpolate(ms.E1, mesh))
        energy.append(n.energy)
        l2.append(n.L2)
    return {"N": list(Ns), "energy": energy, "L2": l2}


def check_E1_slope(epsilon: float = 1e-6, Ns=SLOPE_NS) -> CheckResult:
    data = E1_interpolation_errors(epsilon, Ns)
    s = fitted_slope(Ns, data["energy"])
    return CheckResult(f"||E1 - E1^I||_eps slope, eps={epsilon:g}", s >= 0.9, s, ">= 0.9", data=data)


def per_N_spread(grid, values) -> float:
    """max / min over N of the supremum over eps of ``values`` (one per grid point)."""
    sup: dict[int, float] = {}
    for (_, N), v in zip(grid, values):
        sup[N] = max(sup.get(N, 0.0), v)
    return max(sup.values()) / min(sup.values())


def check_E1_constants(grid=None, sigma: float = 2.5) -> CheckResult:
    """Implied constants of ||E1 - E1^I||_eps <= C/N and ||E1 - E1^I|| <= C N^-sigma over the sweep.

    Stability is judged like the mesh constants: the spread across N of the
    per-N supremum over eps.
    """
    grid = valid_grid(Ns=SLOPE_NS) if grid is None else grid
    c_en, c_l2 = [], []
    for e, N in grid:
        d = E1_interpolation_errors(e, (N,))
        c_en.append(d["energy"][0] * N)
        c_l2.append(d["L2"][0] * N**sigma)
    spread = max(per_N_spread(grid, c_en), per_N_spread(grid, c_l2))
    ok = spread <= 4.0 and bool(np.all(np.isfinite(c_en + c_l2)))
    return CheckResult(
        "E1 interpolation constants, spread", ok, spread, "<= 4",
        f"max C energy {max(c_en):.3g}, max C L2 {max(c_l2):.3g}", {"energy": c_en, "L2": c_l2},
    )


def check_QE1_constants(grid=None, sigma: float = 2.5) -> CheckResult:
    """||Q E1||_eps / ((1 + eps^(1/4) N^(1/2)) N^-sigma) over the sweep."""
    grid = valid_grid(Ns=SLOPE_NS) if grid is None else grid
    cs = []
    for e, N in grid:
        _, ms = get_problem("paper-s5", e)
        q = QE1_column(ms.E1, _mesh(N, e))
        cs.append(norm_fe(q).energy / ((1 + e**0.25 * N**0.5) * N**-sigma))
    spread = per_N_spread(grid, cs)
    return CheckResult("Q E1 column constant, spread", spread <= 4.0, spread, "<= 4", f"max C {max(cs):.3g}", {"C": cs})


def lemma3_errors(epsilon: float = 1e-4, Ns=SLOPE_NS) -> dict:
    _, ms = get_problem("paper-s5", epsilon)
    l2, dx = [], []
    for N in Ns:
        mesh = _mesh(N, epsilon)
        mask = region_masks(mesh)[Region.OMEGA_S]
        n = norm_callable_vs_fe(ms.S, lagrange_interpolate(ms.S, mesh), mask=mask)
        l2.append(n.L2)
        dx.append(n.Dx)
    return {"N": list(Ns), "L2": l2, "Dx": dx}


def check_lemma3_slopes(epsilon: float = 1e-4, Ns=SLOPE_NS) -> CheckResult:
    d = lemma3_errors(epsilon, Ns)
    s_l2 = fitted_slope(Ns, d["L2"])
    s_dx = fitted_slope(Ns, d["Dx"])
    return CheckResult(
        "S interpolation over smooth region: L2 slope", s_l2 >= 1.9 and s_dx >= 0.9, s_l2, ">= 1.9 (and x-derivative >= 0.9)",
        f"x-derivative slope {s_dx:.3f}", d,
    )


def _random_smooth(rng: np.random.Generator, terms: int = 3):
    k = rng.uniform(-6, 6, (terms, 2))
    a = rng.standard_normal(terms)
    ph = rng.uniform(0, 2 * np.pi, terms)

    def w(x, y):
        return sum(a[t] * np.sin(k[t, 0] * x + k[t, 1] * y + ph[t]) for t in range(terms))

    def grad(x, y):
        c = [a[t] * np.cos(k[t, 0] * x + k[t, 1] * y + ph[t]) for t in range(terms)]
        return sum(c[t] * k[t, 0] for t in range(terms)), sum(c[t] * k[t, 1] for t in range(terms))

    return w, grad


def check_lagrange_stability(rng: np.random.Generator, samples: int = 100, n_sub: int = 21) -> CheckResult:
    """max over random (w, cell) of |w^I|_{1,inf,K} / |w|_{1,inf,K}.

    The seminorm is the max over the cell of max(|d_x|, |d_y|); the
    continuous one is sampled on an n_sub x n_sub grid including the corners.
    """
    grid = valid_grid(Ns=(16, 64, 256))
    worst = 0.0
    t = np.linspace(0, 1, n_sub)
    for _ in range(samples):
        e, N = grid[rng.integers(len(grid))]
        m = _mesh(N, e)
        i, j = (int(s) for s in rng.integers(0, N, 2))
        w, grad = _random_smooth(rng)
        X, Y = np.meshgrid(m.x[i] + m.hx[i] * t, m.y[j] + m.hy[j] * t, indexing="ij")
        gx, gy = grad(X, Y)
        semi = max(np.max(np.abs(gx)), np.max(np.abs(gy)))
        c = [w(m.x[i], m.y[j]), w(m.x[i + 1], m.y[j]), w(m.x[i + 1], m.y[j + 1]), w(m.x[i], m.y[j + 1])]
        # gradient of the bilinear interpolant is extremal on the cell edges
        ix = max(abs(c[1] - c[0]), abs(c[2] - c[3])) / m.hx[i]
        iy = max(abs(c[3] - c[0]), abs(c[2] - c[1])) / m.hy[j]
        if semi > 0:
            worst = max(worst, max(ix, iy) / semi)
    return CheckResult("Lagrange W1,inf stability constant", worst <= 4.0, worst, "<= 4")


def check_decomposition(epsilons=FULL_EPSILONS, n: int = 101) -> CheckResult:
    """Derivative-envelope ratios of the decomposition, worst over parts and orders, per eps; must be finite and eps-stable."""
    t = np.linspace(0, 1, n)
    worst_per_eps = []
    for e in epsilons:
        _, ms = get_problem("paper-s5", e)
        # the uniform grid misses the layers, so add layer-resolving samples
        xs = np.unique(np.concatenate([t, e * t * 20]))
        ys = np.unique(np.concatenate([t, math.sqrt(e) * t * 20, 1 - math.sqrt(e) * t * 20]))
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        r = validate_decomposition_bounds(ms, X, Y)
        worst_per_eps.append(max(r.values()))
    worst = max(worst_per_eps)
    spread = worst / min(worst_per_eps)
    ok = bool(np.isfinite(worst)) and spread <= 4.0
    return CheckResult("decomposition envelope ratios", ok, worst, "finite, spread over eps <= 4", f"spread {spread:.3f}")


# -- reference table --------------------------------------------------------------


def compare_table1(reports: list[ConvergenceReport]) -> list[CheckResult]:
    """One result per eps row: errors within the relative tolerance and rates within +-0.1."""
    out = []
    for rep in reports:
        k = exponent_of(rep.epsilon)
        if k not in REFERENCE_ERRORS:
            continue
        ref_e = dict(zip(REFERENCE_NS, REFERENCE_ERRORS[k]))
        ref_r = dict(zip(REFERENCE_NS, REFERENCE_RATES[k]))
        tol = ERROR_TOLERANCE[k]
        rel = [abs(r.err_energy / ref_e[r.N] - 1) for r in rep.records if r.N in ref_e]
        rts = rep.rates.get("err_energy", [])
        dr = [abs(rts[i] - ref_r[N]) for i, N in enumerate(rep.Ns[:-1]) if N in ref_r and i < len(rts)]
        worst_rel = max(rel) if rel else math.nan
        worst_rate = max(dr) if dr else 0.0
        ok = bool(rel) and worst_rel <= tol and worst_rate <= RATE_TOLERANCE
        out.append(CheckResult(
            f"reference errors, eps=1e-{k}", ok, worst_rel, f"rel. error <= {tol:g}, rate diff <= {RATE_TOLERANCE:g}",
            f"worst rate diff {worst_rate:.2f}",
        ))
    return out
