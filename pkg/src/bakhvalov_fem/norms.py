"""Discrete L2, H1-seminorm and energy norms, plus convergence-rate tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fem import FEFunction, QuadratureRule, _basis_table, cell_quadrature


@dataclass(frozen=True)
class Norms:
    L2: float
    H1semi: float
    energy: float
    Dx: float = math.nan  # L2 norm of the x-derivative alone
    Dy: float = math.nan

    def __iter__(self):
        return iter((self.L2, self.H1semi, self.energy))


def _fe_at_quadrature(v: FEFunction, rule: QuadratureRule):
    """Values and physical gradients of a Q1 function at all cell quadrature points."""
    m = v.mesh
    N = m.N
    xi, eta, _ = rule.tensor()
    phi, dxi, deta = _basis_table(xi, eta)
    c = v.coeffs
    corners = np.stack([c[:N, :N], c[1:, :N], c[1:, 1:], c[:N, 1:]], axis=-1)  # (N, N, 4)
    val = corners @ phi
    gx = (corners @ dxi) / m.hx[:, None, None]
    gy = (corners @ deta) / m.hy[None, :, None]
    return val, gx, gy


def _collect(e2, gx2, gy2, W, epsilon: float, mask=None) -> Norms:
    if mask is not None:
        W = W * mask[:, :, None]
    l2 = float(np.sum(e2 * W))
    hx = float(np.sum(gx2 * W))
    hy = float(np.sum(gy2 * W))
    h1 = hx + hy
    return Norms(math.sqrt(l2), math.sqrt(h1), math.sqrt(epsilon * h1 + l2), math.sqrt(hx), math.sqrt(hy))


def norm_fe(v: FEFunction, rule: QuadratureRule | None = None, epsilon: float | None = None, mask=None) -> Norms:
    """Norms of a Q1 function; the 2x2 Gauss default is exact."""
    rule = QuadratureRule.gauss(2) if rule is None else rule
    eps = v.mesh.epsilon if epsilon is None else epsilon
    val, gx, gy = _fe_at_quadrature(v, rule)
    _, _, W = cell_quadrature(v.mesh, rule)
    return _collect(val**2, gx**2, gy**2, W, eps, mask)


def norm_fe_difference(a: FEFunction, b: FEFunction, rule: QuadratureRule | None = None, epsilon: float | None = None) -> Norms:
    if a.mesh is not b.mesh:
        raise ValueError("FE functions live on different meshes")
    return norm_fe(a - b, rule, epsilon)


def _callable_at(w, X, Y):
    if hasattr(w, "d"):
        return w(X, Y), w.d(1, 0, X, Y), w.d(0, 1, X, Y)
    fn, grad = w
    gx, gy = grad(X, Y)
    return fn(X, Y), gx, gy


def norm_callable_vs_fe(w, v: FEFunction, rule: QuadratureRule | None = None, epsilon: float | None = None, mask=None) -> Norms:
    """Norms of ``w - v`` for a smooth ``w``.

    ``w`` is either an object with ``w(x, y)`` and ``w.d(m, n, x, y)`` or a
    pair ``(w, grad_w)``.  Default rule is 5x5 Gauss per cell.
    """
    rule = QuadratureRule.gauss(5) if rule is None else rule
    eps = v.mesh.epsilon if epsilon is None else epsilon
    X, Y, W = cell_quadrature(v.mesh, rule)
    wv, wx, wy = _callable_at(w, X, Y)
    val, gx, gy = _fe_at_quadrature(v, rule)
    return _collect((wv - val) ** 2, (wx - gx) ** 2, (wy - gy) ** 2, W, eps, mask)


def max_abs_callable_vs_fe(w: Callable, v: FEFunction, n_per_dir: int = 5) -> float:
    """Sampled max |w - v| on a uniform n x n sub-grid of every cell (cell corners included)."""
    t = np.linspace(0.0, 1.0, n_per_dir)
    rule = QuadratureRule(n_per_dir, t, np.full(n_per_dir, 1.0 / n_per_dir))
    X, Y, _ = cell_quadrature(v.mesh, rule)
    val, _, _ = _fe_at_quadrature(v, rule)
    return float(np.max(np.abs(w(X, Y) - val)))


def fitted_slope(Ns: Sequence[int], errors: Sequence[float]) -> float:
    """Least-squares slope of -log2(error) against log2(N)."""
    p = np.polyfit(np.log2(np.asarray(Ns, float)), -np.log2(np.asarray(errors, float)), 1)
    return float(p[0])


class RateError(ValueError):
    pass


@dataclass
class ErrorRecord:
    epsilon: float
    N: int
    err_energy: float  # ||u^I - u^N||_eps
    err_superclose: float = math.nan  # ||Pi u - u^N||_eps
    err_L2: float = math.nan  # ||u - u^N||
    err_interp_L2: float = math.nan  # ||u - u^I||
    wall_time: float = 0.0
    failure: str | None = None


ERROR_COLUMNS = ("err_energy", "err_superclose", "err_L2", "err_interp_L2")


@dataclass
class ConvergenceReport:
    epsilon: float
    records: list[ErrorRecord]
    rates: dict[str, list[float]] = field(default_factory=dict)

    @property
    def Ns(self) -> list[int]:
        return [r.N for r in self.records]

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.records]


def log2_rate(e_coarse: float, e_fine: float) -> float:
    return math.log2(e_coarse / e_fine)


def rates(report: ConvergenceReport) -> ConvergenceReport:
    """Fill ``report.rates[col][k] = log2(e_k / e_{k+1})`` for consecutive doublings."""
    Ns = report.Ns
    if len(Ns) < 2:
        raise RateError("need at least two records to compute rates")
    for a, b in zip(Ns, Ns[1:]):
        if b != 2 * a:
            raise RateError(f"N sequence must double; got {a} -> {b}")
    for col in ERROR_COLUMNS:
        e = report.column(col)
        report.rates[col] = [
            log2_rate(a, b) if (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)) else math.nan
            for a, b in zip(e, e[1:])
        ]
    return report
