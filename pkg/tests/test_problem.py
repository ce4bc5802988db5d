import math

import mpmath
import numpy as np
import pytest
import sympy as sp

from bakhvalov_fem.problem import (
    CoefficientSet,
    Polynomial2D,
    envelope,
    fd_laplacian,
    get_problem,
    richardson,
    validate_decomposition_bounds,
    validate_operator_consistency,
)

EPS = np.finfo(float).eps
X, Y = sp.symbols("x y", real=True)


def symbolic_u(eps):
    e = sp.Rational(1, int(round(1 / eps)))
    g = sp.cos(sp.pi * X / 2) - (sp.exp(-X / e) - sp.exp(-1 / e)) / (1 - sp.exp(-1 / e))
    s = sp.sqrt(e)
    h = (1 - sp.exp(-Y / s)) * (1 - sp.exp(-(1 - Y) / s)) / (1 - sp.exp(-1 / s))
    return e, g * h


def grid(n=101):
    t = np.linspace(0, 1, n)
    return np.meshgrid(t, t, indexing="ij")


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
def test_boundary_values_vanish(eps):
    _, ms = get_problem("paper-s5", eps)
    t = np.linspace(0, 1, 201)
    for vals in (ms(0.0, t), ms(1.0, t), ms(t, 0.0), ms(t, 1.0)):
        assert np.max(np.abs(vals)) <= 8 * EPS


def test_value_at_center_matches_extended_precision():
    eps = 1e-2
    _, ms = get_problem("paper-s5", eps)
    with mpmath.workdps(50):
        e = mpmath.mpf(1) / 100
        x = y = mpmath.mpf(1) / 2
        g = mpmath.cos(mpmath.pi * x / 2) - (mpmath.exp(-x / e) - mpmath.exp(-1 / e)) / (1 - mpmath.exp(-1 / e))
        s = mpmath.sqrt(e)
        h = (1 - mpmath.exp(-y / s)) * (1 - mpmath.exp(-(1 - y) / s)) / (1 - mpmath.exp(-1 / s))
        ref = float(g * h)
    assert ms(0.5, 0.5) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6, 1e-8])
def test_decomposition_sums_to_u(eps):
    _, ms = get_problem("paper-s5", eps)
    x, y = grid()
    u = ms(x, y)
    parts = ms.S(x, y) + ms.E1(x, y) + ms.E2(x, y) + ms.E12(x, y)
    # u is evaluated as the same four products; compare against the direct product formula
    g = np.cos(np.pi * x / 2) - (np.exp(-x / eps) - math.exp(-1 / eps)) / (1 - math.exp(-1 / eps))
    s = math.sqrt(eps)
    h = (1 - np.exp(-y / s)) * (1 - np.exp(-(1 - y) / s)) / (1 - math.exp(-1 / s))
    scale = np.max(np.abs(g * h))
    assert np.max(np.abs(parts - u)) <= 8 * EPS * scale
    assert np.max(np.abs(g * h - u)) <= 8 * EPS * scale


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_source_matches_symbolic_operator(eps, rng):
    e, u = symbolic_u(eps)
    b = 3 - X - Y
    f = -e * (sp.diff(u, X, 2) + sp.diff(u, Y, 2)) - b * sp.diff(u, X) + 2 * u
    f_num = sp.lambdify((X, Y), f, modules="mpmath")
    cs, _ = get_problem("paper-s5", eps)
    for x, y in rng.uniform(0, 1, (20, 2)):
        with mpmath.workdps(40):
            ref = float(f_num(mpmath.mpf(x), mpmath.mpf(y)))
        assert cs.f(x, y) == pytest.approx(ref, rel=1e-9, abs=1e-9 * max(1.0, abs(ref)))


def test_operator_residual_smooth_region():
    cs, ms = get_problem("paper-s5", 1e-2)
    t = np.linspace(0.3, 0.7, 9)
    x, y = np.meshgrid(t, t, indexing="ij")
    rep = validate_operator_consistency(ms, cs, x, y, step=1e-4)
    assert rep["max_residual"] <= 1e-6 * rep["max_f"]


def test_operator_residual_zero_pair():
    zero = lambda x, y: np.zeros(np.broadcast(x, y).shape)  # noqa: E731
    cs = CoefficientSet(lambda x, y: 3.0 - x - y, lambda x, y: -1.0 + 0 * x, lambda x, y: 2.0 + 0 * x, zero, 1.0, 1.5)
    x, y = grid(11)
    assert validate_operator_consistency(zero, cs, x, y)["max_residual"] == 0.0


def test_operator_residual_inside_layers_is_small():
    # steps shrink with eps inside the layers, so the residual stays O(step^2) relative to f
    eps = 1e-4
    cs, ms = get_problem("paper-s5", eps)
    x = np.array([2 * eps, 5 * eps, 0.5, 0.5])
    y = np.array([0.5, 0.3, 2 * math.sqrt(eps), 1 - 3 * math.sqrt(eps)])
    rep = validate_operator_consistency(ms, cs, x, y, step=1e-3)
    assert rep["max_residual"] <= 1e-4 * rep["max_f"]


def test_richardson_laplacian_at_center():
    eps = 1e-2
    _, ms = get_problem("paper-s5", eps)
    exact = float(ms.d(2, 0, 0.5, 0.5) + ms.d(0, 2, 0.5, 0.5))
    fd = richardson(lambda h: fd_laplacian(ms, 0.5, 0.5, h, h), 1e-3)
    assert float(fd) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_analytic_derivatives_against_richardson(eps):
    """d/dx and d/dy of every stored derivative of order <= 2 match the stored next order.

    Each part is sampled where it is not negligible (inside its own layer),
    with finite-difference steps scaled by eps or sqrt(eps) there.
    """
    _, ms = get_problem("paper-s5", eps)
    s = math.sqrt(eps)
    samples = {
        "S": [(0.4, 0.5), (0.7, 0.3)],
        "E1": [(2 * eps, 0.5), (0.5 * eps, 0.3)],
        "E2": [(0.4, 2 * s), (0.6, 1 - 1.5 * s)],
        "E12": [(2 * eps, 2 * s), (eps, 1 - s)],
    }
    for name, part in ms.parts.items():
        for x, y in samples[name]:
            hx = 1e-3 * (eps if name in ("E1", "E12") else 1.0)
            hy = 1e-3 * (s if name in ("E2", "E12") else 1.0)
            for m in range(3):
                for n in range(3 - m):
                    dx = richardson(lambda k: (part.d(m, n, x + k * hx, y) - part.d(m, n, x - k * hx, y)) / (2 * k * hx), 1.0)
                    dy = richardson(lambda k: (part.d(m, n, x, y + k * hy) - part.d(m, n, x, y - k * hy)) / (2 * k * hy), 1.0)
                    ex, ey = float(part.d(m + 1, n, x, y)), float(part.d(m, n + 1, x, y))
                    assert float(dx) == pytest.approx(ex, rel=1e-6, abs=1e-300)
                    assert float(dy) == pytest.approx(ey, rel=1e-6, abs=1e-300)


def test_parts_match_symbolic_derivatives():
    eps = 1e-4
    e, u = symbolic_u(eps)
    _, ms = get_problem("paper-s5", eps)
    for (m, n) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1), (1, 2)]:
        expr = sp.lambdify((X, Y), sp.diff(u, X, m, Y, n) if m and n else sp.diff(u, *( [X] * m + [Y] * n)) if m + n else u, "mpmath")
        for x, y in [(1e-4, 0.01), (0.3, 0.5), (0.02, 0.97)]:
            with mpmath.workdps(40):
                ref = float(expr(mpmath.mpf(x), mpmath.mpf(y)))
            assert float(ms.d(m, n, x, y)) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_coefficient_certificates():
    cs, _ = get_problem("paper-s5", 1e-6)
    bmin, cmin = cs.certify(201)
    assert cs.beta == 1.0 and cs.gamma == 1.5
    assert bmin >= cs.beta and cmin >= cs.gamma


def test_decomposition_envelopes():
    x, y = grid()
    _, ms = get_problem("paper-s5", 1e-4)
    r = validate_decomposition_bounds(ms, x, y)
    assert r[("S", 0, 0)] <= 2.0
    assert all(np.isfinite(v) for v in r.values())
    # E1 at x = 1 lies below the e^(-beta/eps) envelope
    assert abs(ms.E1(1.0, 0.5)) <= math.exp(-1 / 1e-4) * 2
    _, ms2 = get_problem("paper-s5", 1e-2)
    r2 = validate_decomposition_bounds(ms2, x, y)
    assert r2[("E12", 1, 0)] <= 2.0
    env = envelope("E12", 1, 0, 1e-2, 1.0, x, y)
    assert np.all(np.abs(ms2.E12.d(1, 0, x, y)) <= 2.0 * env + 1e-300)


def test_decomposition_ratios_stable_in_eps():
    x, y = grid(61)
    worst = []
    for k in range(2, 9):
        _, ms = get_problem("paper-s5", 10.0**-k)
        worst.append(max(validate_decomposition_bounds(ms, x, y).values()))
    assert max(worst) / min(worst) <= 4.0


def test_printed_denominator_breaks_boundary_condition():
    _, ms = get_problem("paper-s5", 1e-4, denominator="printed")
    assert abs(ms(0.5, 0.0)) > 0.5
    with pytest.raises(ValueError):
        get_problem("paper-s5", 1e-4, denominator="other")


def test_problem_registry():
    with pytest.raises(ValueError):
        get_problem("nope", 1e-4)
    with pytest.raises(ValueError):
        get_problem("paper-s5", 1.5)


def test_polynomial_derivatives_against_sympy(rng):
    a = rng.standard_normal((4, 4))
    c = (0.3, -0.2)
    p = Polynomial2D(a, c)
    expr = sum(a[m, n] * (X - c[0]) ** m * (Y - c[1]) ** n for m in range(4) for n in range(4))
    for m in range(4):
        for n in range(4):
            d = sp.diff(expr, X, m, Y, n) if (m or n) else expr
            f = sp.lambdify((X, Y), d)
            assert p.d(m, n, 0.7, 0.1) == pytest.approx(f(0.7, 0.1), rel=1e-12, abs=1e-12)
