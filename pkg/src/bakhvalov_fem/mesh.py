"""Bakhvalov-type tensor-product mesh on the unit square.

The x-direction is graded towards the exponential layer at x = 0, the
y-direction towards the two parabolic layers at y = 0 and y = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class InvalidConfigError(ValueError):
    """Raised when a mesh or study configuration violates its preconditions."""


@dataclass(frozen=True)
class MeshConfig:
    N: int
    epsilon: float
    sigma: float = 2.5
    beta: float = 1.0
    # Skip the convergence-analysis preconditions (eps <= 1/N and the
    # transition-point bounds).  Used to reproduce the large-eps table rows.
    strict: bool = True

    def check(self) -> None:
        N, eps, sigma, beta = self.N, self.epsilon, self.sigma, self.beta
        if not isinstance(N, (int, np.integer)) or N < 8 or N % 4:
            raise InvalidConfigError(f"N must be an integer >= 8 divisible by 4, got {N!r}")
        if not 0.0 < eps < 1.0:
            raise InvalidConfigError(f"epsilon must lie in (0, 1), got {eps!r}")
        if sigma <= 0 or beta <= 0:
            raise InvalidConfigError("sigma and beta must be positive")
        if not self.strict:
            return
        if eps > 1.0 / N:
            raise InvalidConfigError(f"epsilon={eps:g} > 1/N={1.0 / N:g}")
        if x_transition(eps, sigma, beta) > 0.5:
            raise InvalidConfigError("sigma*eps/beta*ln(1/eps) > 1/2")
        if y_transition(eps, sigma) > 0.25:
            raise InvalidConfigError("sigma*sqrt(eps)*ln(1/eps) > 1/4")


def x_transition(epsilon: float, sigma: float = 2.5, beta: float = 1.0) -> float:
    """Width of the x-layer region, x_{N/2}."""
    return -(sigma * epsilon / beta) * math.log(epsilon)


def y_transition(epsilon: float, sigma: float = 2.5) -> float:
    """Width of each y-layer region, y_{N/4} = 1 - y_{3N/4}."""
    return -(sigma * math.sqrt(epsilon)) * math.log(epsilon)


def satisfies_assumptions(N: int, epsilon: float, sigma: float = 2.5, beta: float = 1.0) -> bool:
    try:
        MeshConfig(N, epsilon, sigma, beta).check()
    except InvalidConfigError:
        return False
    return True


def _log_arg(scale: float, t: np.ndarray, epsilon: float) -> np.ndarray:
    # 1 - scale*(1-eps)*t, arranged so it is exactly eps at t = 1/scale
    return (1.0 - scale * t) + scale * epsilon * t


def x_nodes(N: int, epsilon: float, sigma: float, beta: float) -> np.ndarray:
    half = N // 2
    x = np.empty(N + 1)
    t = np.arange(half + 1) / N
    x[: half + 1] = -(sigma * epsilon / beta) * np.log(_log_arg(2.0, t, epsilon))
    i = np.arange(half + 1, N + 1)
    x[half + 1 :] = 1.0 - (1.0 - x[half]) * 2.0 * (N - i) / N
    x[0], x[N] = 0.0, 1.0
    return x


def y_slopes(epsilon: float, sigma: float) -> tuple[float, float]:
    """Slopes (d1, d2) making the middle y-branch meet both layer branches."""
    lam = y_transition(epsilon, sigma)
    # middle branch is -d2/2 at t=1/4 and d1/2 at t=3/4
    return 2.0 * (1.0 - lam), -2.0 * lam


def y_branches(N: int, epsilon: float, sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All three branches of the y-map evaluated at every t = j/N."""
    t = np.arange(N + 1) / N
    a = sigma * math.sqrt(epsilon)
    d1, d2 = y_slopes(epsilon, sigma)
    with np.errstate(invalid="ignore", divide="ignore"):
        lower = -a * np.log(_log_arg(4.0, t, epsilon))
        upper = 1.0 + a * np.log(_log_arg(4.0, 1.0 - t, epsilon))
    middle = d1 * (t - 0.25) + d2 * (t - 0.75)
    return lower, middle, upper


def y_nodes(N: int, epsilon: float, sigma: float) -> np.ndarray:
    q = N // 4
    lower, middle, upper = y_branches(N, epsilon, sigma)
    y = middle.copy()
    y[: q + 1] = lower[: q + 1]
    y[3 * q :] = upper[3 * q :]
    y[0], y[N] = 0.0, 1.0
    return y


def _uniformized_y(N: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, N + 1)


@dataclass(frozen=True, eq=False)
class TensorMesh2D:
    """Immutable graded tensor mesh; cell (i, j) is [x_i, x_{i+1}] x [y_j, y_{j+1}]."""

    config: MeshConfig
    x: np.ndarray
    y: np.ndarray
    d1: float
    d2: float
    hx: np.ndarray = field(init=False)
    hy: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "hx", np.diff(self.x))
        object.__setattr__(self, "hy", np.diff(self.y))
        for a in (self.x, self.y, self.hx, self.hy):
            a.flags.writeable = False

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def epsilon(self) -> float:
        return self.config.epsilon

    @property
    def H(self) -> float:
        return float(self.hx[self.N // 2])

    @property
    def h(self) -> float:
        return float(self.hy[self.N // 4])

    def node_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (N+1, N+1) arrays indexed [i, j]."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def to_csv(self) -> str:
        lines = ["axis,index,coordinate"]
        for axis, coords in (("x", self.x), ("y", self.y)):
            lines += [f"{axis},{k},{c:.17e}" for k, c in enumerate(coords)]
        return "\n".join(lines) + "\n"


def build_mesh(cfg: MeshConfig) -> TensorMesh2D:
    """Construct the Bakhvalov-type mesh for ``cfg``.

    With ``cfg.strict`` off and a y-layer region wider than 1/4 the graded
    y-map folds back on itself; the y-direction then falls back to a uniform
    partition (the layer is resolved by a uniform mesh at that size).
    """
    cfg.check()
    N, eps, sigma, beta = cfg.N, cfg.epsilon, cfg.sigma, cfg.beta
    if x_transition(eps, sigma, beta) >= 1.0:
        raise InvalidConfigError("x-layer region covers the whole domain")
    x = x_nodes(N, eps, sigma, beta)
    d1, d2 = y_slopes(eps, sigma)
    if y_transition(eps, sigma) <= 0.25:
        y = y_nodes(N, eps, sigma)
    else:
        y = _uniformized_y(N)
    return TensorMesh2D(cfg, x, y, d1, d2)


class Region(enum.Enum):
    OMEGA_S = "OmegaS"
    OMEGA_X = "OmegaX"
    OMEGA_Y = "OmegaY"
    OMEGA_XY = "OmegaXY"


@dataclass(frozen=True)
class SubdomainTag:
    tag: Region
    in_omega0: bool


def classify_cell(mesh: TensorMesh2D, i: int, j: int) -> SubdomainTag:
    N = mesh.N
    if not (0 <= i < N and 0 <= j < N):
        raise IndexError(f"cell ({i}, {j}) outside 0..{N - 1}")
    in_x_layer = i < N // 2 - 1
    in_y_layer = j < N // 4 - 1 or j >= 3 * N // 4 + 1
    if in_x_layer:
        tag = Region.OMEGA_XY if in_y_layer else Region.OMEGA_X
    else:
        tag = Region.OMEGA_Y if in_y_layer else Region.OMEGA_S
    return SubdomainTag(tag, i == N // 2 - 1)


def region_masks(mesh: TensorMesh2D) -> dict[Region, np.ndarray]:
    """Boolean (N, N) cell masks for each region, indexed [i, j]."""
    N = mesh.N
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    xl = np.broadcast_to(i < N // 2 - 1, (N, N))
    yl = np.broadcast_to((j < N // 4 - 1) | (j >= 3 * N // 4 + 1), (N, N))
    return {
        Region.OMEGA_S: ~xl & ~yl,
        Region.OMEGA_X: xl & ~yl,
        Region.OMEGA_Y: ~xl & yl,
        Region.OMEGA_XY: xl & yl,
    }


@dataclass
class LemmaCheck:
    name: str
    passed: bool
    value: float
    bound: float | None = None
    # "hard": explicit inequality; "two-sided"/"upper": empirical constant of a C-bound
    kind: str = "hard"


@dataclass
class MeshLemmaReport:
    N: int
    epsilon: float
    checks: list[LemmaCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def ratios(self, kind: str | None = None) -> dict[str, float]:
        return {c.name: c.value for c in self.checks if c.kind != "hard" and (kind is None or c.kind == kind)}


def verify_mesh_lemmas(mesh: TensorMesh2D, alpha: float = 0.5) -> MeshLemmaReport:
    """Evaluate the mesh-step inequalities and the empirical constants behind them.

    Hard inequalities (explicit constants) are reported as pass/fail.  The
    other entries are the implied generic constants: ``two-sided`` ones should
    stay in a fixed band across an (eps, N) sweep, ``upper`` ones should stay
    bounded; :func:`lemma_constant_spread` measures both.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    N, eps = mesh.N, mesh.epsilon
    sigma, beta = mesh.config.sigma, mesh.config.beta
    rt = math.sqrt(eps)
    hx, hy = mesh.hx, mesh.hy
    h, q = N // 2, N // 4
    tiny = 8 * np.finfo(float).eps
    checks: list[LemmaCheck] = []

    def add(name, value, lo=None, hi=None, kind="hard"):
        ok = bool(np.isfinite(value))
        if lo is not None:
            ok &= value >= lo * (1 - tiny)
        if hi is not None:
            ok &= value <= hi * (1 + tiny)
        checks.append(LemmaCheck(name, bool(ok), float(value), hi, kind))

    def ratio(name, value, kind="two-sided"):
        add(name, value, lo=0.0, kind=kind)

    add("H in [1/N, 2/N]", mesh.H, 1.0 / N, 2.0 / N)
    # widths are differences of O(1) coordinates: absolute rounding ~ machine eps
    add("coarse x widths equal H", float(np.ptp(hx[h:])), hi=tiny)
    add("interior y widths equal h", float(np.ptp(hy[q : 3 * q])), hi=tiny)
    add("h_x,N/2-1 >= sigma*eps/2", hx[h - 1], lo=0.5 * sigma * eps)
    add("h_x,N/2-1 <= 2*sigma/N", hx[h - 1], hi=2 * sigma / N)
    add("fine x widths monotone", float(np.min(np.diff(hx[: h - 1]), initial=0.0)), lo=0.0)
    add("h_x,N/2-2 <= sigma*eps", hx[h - 2], hi=sigma * eps)
    add("fine y widths monotone", float(np.min(np.diff(hy[: q - 1]), initial=0.0)), lo=0.0)
    add("h_y,N/4-2 <= sigma*sqrt(eps)", hy[q - 2], hi=sigma * rt)
    add("y layer widths symmetric", float(np.max(np.abs(hy[:q] - hy[::-1][:q]))), hi=tiny)

    ratio("h_x,0/(eps/N)", hx[0] / (eps / N))
    ratio("h_y,0/(sqrt(eps)/N)", hy[0] / (rt / N))
    ratio("x_N/2-1/(sigma*eps*lnN)", mesh.x[h - 1] / (sigma * eps * math.log(N)))
    ratio("y_N/4-1/(sigma*sqrt(eps)*lnN)", mesh.y[q - 1] / (sigma * rt * math.log(N)))
    ratio("x_N/2/(sigma*eps*|ln eps|)", mesh.x[h] / (sigma * eps * abs(math.log(eps))))
    ratio(f"h_x,N/2-1/(eps^(1-a)N^-a) a={alpha:g}", hx[h - 1] / (eps ** (1 - alpha) * N**-alpha), "upper")
    ratio(f"h_y,N/4-1/(sqrt(eps)^(1-a)N^-a) a={alpha:g}", hy[q - 1] / (rt ** (1 - alpha) * N**-alpha), "upper")
    # h_{x,i}^mu exp(-beta x_i/eps) <= C (eps/N)^mu, worst case over i and mu in {1, sigma}
    fine = slice(0, h - 1)
    for mu in (1.0, sigma):
        lhs = hx[fine] ** mu * np.exp(-beta * mesh.x[fine] / eps)
        ratio(f"max h_x^mu e^(-bx/eps)/(eps/N)^mu mu={mu:g}", float(lhs.max() / (eps / N) ** mu), "upper")
    ratio("e^(-b x_N/2/eps)/eps^sigma", math.exp(-beta * mesh.x[h] / eps) / eps**sigma, "upper")
    ratio("e^(-b x_N/2-1/eps)/N^-sigma", math.exp(-beta * mesh.x[h - 1] / eps) / N**-sigma, "upper")
    return MeshLemmaReport(N, eps, checks)


def lemma_constant_spread(reports: list[MeshLemmaReport]) -> dict[str, float]:
    """Spread of each empirical constant across a sweep of reports.

    Two-sided constants: max / min over the sweep.  Upper-bound constants:
    the supremum over epsilon is taken per N, and the spread is max / min of
    those suprema (a growing constant would show up as a large spread).
    """
    out: dict[str, float] = {}
    two = {}
    upper: dict[str, dict[int, float]] = {}
    for r in reports:
        for name, v in r.ratios("two-sided").items():
            two.setdefault(name, []).append(v)
        for name, v in r.ratios("upper").items():
            per_N = upper.setdefault(name, {})
            per_N[r.N] = max(per_N.get(r.N, 0.0), v)
    for name, vals in two.items():
        out[name] = max(vals) / min(vals)
    for name, per_N in upper.items():
        sups = list(per_N.values())
        out[name] = max(sups) / min(sups)
    return out
