"""Model problem  -eps*Lap(u) - b*u_x + c*u = f  on the unit square, u = 0 on the boundary.

The manufactured test solution is a product g(x) h(y) of 1D layer profiles,
so every part of its decomposition and every partial derivative is a product
of closed-form 1D factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_ORDER = 3


@dataclass(frozen=True)
class Factor1D:
    """A 1D function together with its derivatives of order 0..3."""

    derivs: tuple[Callable[[np.ndarray], np.ndarray], ...]

    def __call__(self, t):
        return self.derivs[0](np.asarray(t, dtype=float))

    def d(self, m: int, t):
        return self.derivs[m](np.asarray(t, dtype=float))

    def __add__(self, other: "Factor1D") -> "Factor1D":
        return Factor1D(tuple((lambda t, a=a, b=b: a(t) + b(t)) for a, b in zip(self.derivs, other.derivs)))


def _constant(value: float) -> Factor1D:
    zero = lambda t: np.zeros_like(t)  # noqa: E731
    return Factor1D((lambda t: np.full_like(t, value), zero, zero, zero))


def _exp_decay(amplitude: float, rate: float, origin: float = 0.0, sign: float = 1.0) -> Factor1D:
    """amplitude * exp(-sign*(t - origin)*rate), sign = +1 decays away from origin to the right."""
    k = -sign * rate

    def make(m):
        return lambda t: amplitude * k**m * np.exp(k * (t - origin))

    return Factor1D(tuple(make(m) for m in range(MAX_ORDER + 1)))


def _cos_half_pi() -> Factor1D:
    w = math.pi / 2
    return Factor1D((
        lambda t: np.cos(w * t),
        lambda t: -w * np.sin(w * t),
        lambda t: -w**2 * np.cos(w * t),
        lambda t: w**3 * np.sin(w * t),
    ))


@dataclass(frozen=True)
class SeparableFunction:
    """p(x) * q(y) with partial derivatives ``d(m, n)``."""

    fx: Factor1D
    fy: Factor1D

    def __call__(self, x, y):
        return self.fx(x) * self.fy(y)

    def d(self, m: int, n: int, x, y):
        return self.fx.d(m, x) * self.fy.d(n, y)


@dataclass(frozen=True)
class SumFunction:
    terms: tuple[SeparableFunction, ...]

    def __call__(self, x, y):
        return sum(t(x, y) for t in self.terms)

    def d(self, m: int, n: int, x, y):
        return sum(t.d(m, n, x, y) for t in self.terms)


@dataclass(frozen=True)
class CoefficientSet:
    b: Callable
    b_x: Callable
    c: Callable
    f: Callable
    beta: float
    gamma: float

    def certify(self, n: int = 201) -> tuple[float, float]:
        """Minimum of b and of c + b_x/2 over an n x n grid of the closed square."""
        x, y = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")
        return float(np.min(self.b(x, y))), float(np.min(self.c(x, y) + 0.5 * self.b_x(x, y)))


@dataclass(frozen=True)
class ManufacturedSolution:
    epsilon: float
    S: SeparableFunction
    E1: SeparableFunction
    E2: SeparableFunction
    E12: SeparableFunction

    @property
    def parts(self) -> dict[str, SeparableFunction]:
        return {"S": self.S, "E1": self.E1, "E2": self.E2, "E12": self.E12}

    @property
    def u(self) -> SumFunction:
        return SumFunction((self.S, self.E1, self.E2, self.E12))

    def __call__(self, x, y):
        return self.u(x, y)

    def d(self, m: int, n: int, x, y):
        return self.u.d(m, n, x, y)


PROBLEMS = ("paper-s5",)


def test_problem(epsilon: float, denominator: str = "standard") -> tuple[CoefficientSet, ManufacturedSolution]:
    """Coefficients and exact solution of the benchmark problem.

    ``u = g(x) h(y)`` with an exponential layer at x = 0 and parabolic layers
    at y = 0, 1.  ``denominator="standard"`` normalises h by ``1 - exp(-1/sqrt(eps))``;
    ``"printed"`` keeps the literal typeset form, which reduces h to
    ``1 - exp(-(1-y)/sqrt(eps))`` and does not vanish at y = 0.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    eps = epsilon
    s = math.sqrt(eps)
    ex = math.exp(-1.0 / eps)
    dx = -math.expm1(-1.0 / eps)

    g_e = _exp_decay(-1.0 / dx, 1.0 / eps)
    g_s = _cos_half_pi() + _constant(ex / dx)

    if denominator == "standard":
        ey = math.exp(-1.0 / s)
        dy = -math.expm1(-1.0 / s)
        h_s = _constant((1.0 + ey) / dy)
        h_p = _exp_decay(-1.0 / dy, 1.0 / s) + _exp_decay(-1.0 / dy, 1.0 / s, origin=1.0, sign=-1.0)
    elif denominator == "printed":
        h_s = _constant(1.0)
        h_p = _exp_decay(-1.0, 1.0 / s, origin=1.0, sign=-1.0)
    else:
        raise ValueError(f"unknown denominator form {denominator!r}")

    ms = ManufacturedSolution(
        eps,
        S=SeparableFunction(g_s, h_s),
        E1=SeparableFunction(g_e, h_s),
        E2=SeparableFunction(g_s, h_p),
        E12=SeparableFunction(g_e, h_p),
    )
    g = g_s + g_e
    h = h_s + h_p

    def b(x, y):
        return 3.0 - np.asarray(x, dtype=float) - y

    def b_x(x, y):
        return np.full(np.broadcast(x, y).shape, -1.0)

    def c(x, y):
        return np.full(np.broadcast(x, y).shape, 2.0)

    def f(x, y):
        gx, g1, g2 = g(x), g.d(1, x), g.d(2, x)
        hy, h2 = h(y), h.d(2, y)
        return -eps * (g2 * hy + gx * h2) - b(x, y) * g1 * hy + 2.0 * gx * hy

    return CoefficientSet(b, b_x, c, f, beta=1.0, gamma=1.5), ms


def get_problem(name: str, epsilon: float, **kwargs):
    if name != "paper-s5":
        raise ValueError(f"unknown problem {name!r}; choose from {PROBLEMS}")
    return test_problem(epsilon, **kwargs)


def _fd_step(epsilon: float, x: np.ndarray, y: np.ndarray, base: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-point finite-difference steps, shrunk inside the layers."""
    eps = epsilon
    s = math.sqrt(eps)
    sx = np.where(x < 10 * eps, base * eps, base)
    sy = np.where((y < 10 * s) | (y > 1 - 10 * s), base * s, base)
    return sx, sy


def fd_laplacian(u: Callable, x, y, hx, hy):
    return (
        (u(x + hx, y) - 2 * u(x, y) + u(x - hx, y)) / hx**2
        + (u(x, y + hy) - 2 * u(x, y) + u(x, y - hy)) / hy**2
    )


def fd_dx(u: Callable, x, y, hx):
    return (u(x + hx, y) - u(x - hx, y)) / (2 * hx)


def validate_operator_consistency(ms, cs: CoefficientSet, x, y, step: float = 1e-4) -> dict:
    """Residual of the PDE with u differentiated by central differences.

    ``ms`` may be anything callable as u(x, y); the residual is O(step^2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = getattr(ms, "epsilon", None)
    if eps is None:
        sx = sy = np.full_like(x, step)
        eps = 0.0
    else:
        sx, sy = _fd_step(eps, x, y, step)
    lap = fd_laplacian(ms, x, y, sx, sy)
    ux = fd_dx(ms, x, y, sx)
    res = -eps * lap - cs.b(x, y) * ux + cs.c(x, y) * ms(x, y) - cs.f(x, y)
    fmax = float(np.max(np.abs(cs.f(x, y)))) if x.size else 0.0
    return {"max_residual": float(np.max(np.abs(res))), "max_f": fmax, "step": step}


def richardson(op: Callable[[float], np.ndarray], step: float) -> np.ndarray:
    """Second-order central difference ``op(step)`` extrapolated to fourth order."""
    return (4.0 * op(step / 2) - op(step)) / 3.0


def envelope(part: str, m: int, n: int, epsilon: float, beta: float, x, y):
    """Derivative envelope for a decomposition part (constant C dropped)."""
    eps = epsilon
    s = math.sqrt(eps)
    ey = np.exp(-y / s) + np.exp(-(1 - y) / s)
    if part == "S":
        return np.ones(np.broadcast(x, y).shape)
    if part == "E1":
        return eps**-m * np.exp(-beta * x / eps) * np.ones_like(y)
    if part == "E2":
        return eps ** (-n / 2) * ey * np.ones_like(x)
    if part == "E12":
        return eps ** (-(m + n / 2)) * np.exp(-beta * x / eps) * ey
    raise ValueError(part)


def validate_decomposition_bounds(ms: ManufacturedSolution, x, y, beta: float = 1.0, max_order: int = 2) -> dict:
    """Max ratio |d^{m+n} part| / envelope over the sample points, per part and order.

    Points where the envelope underflows to zero are skipped; there the part
    itself is zero to working precision.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = {}
    for name, part in ms.parts.items():
        for m in range(max_order + 1):
            for n in range(max_order + 1 - m):
                env = envelope(name, m, n, ms.epsilon, beta, x, y)
                val = np.abs(part.d(m, n, x, y))
                ok = env > 1e-280
                ratio = np.where(ok, val / np.where(ok, env, 1.0), 0.0)
                out[(name, m, n)] = float(ratio.max())
    return out


@dataclass(frozen=True)
class Polynomial2D:
    """sum_{m,n} a[m, n] (x - x0)^m (y - y0)^n with exact partial derivatives."""

    coeffs: np.ndarray
    center: tuple[float, float] = (0.0, 0.0)

    def __call__(self, x, y):
        return self.d(0, 0, x, y)

    def d(self, p: int, q: int, x, y):
        a = np.asarray(self.coeffs, dtype=float)
        X = np.asarray(x, dtype=float) - self.center[0]
        Y = np.asarray(y, dtype=float) - self.center[1]
        out = np.zeros(np.broadcast(X, Y).shape)
        for m in range(p, a.shape[0]):
            for n in range(q, a.shape[1]):
                if a[m, n]:
                    fx = math.perm(m, p) * X ** (m - p)
                    fy = math.perm(n, q) * Y ** (n - q)
                    out = out + a[m, n] * fx * fy
        return out
