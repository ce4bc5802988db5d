"""Convergence studies: build -> assemble -> solve -> measure over (eps, N) sweeps."""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checks
from .export import aligned_table, convergence_csv, write_text
from .fem import QuadratureRule, SolverError, assemble, solve, FEFunction
from .interpolation import build_Piu
from .mesh import InvalidConfigError, MeshConfig, build_mesh, satisfies_assumptions
from .norms import ConvergenceReport, ErrorRecord, RateError, fitted_slope, norm_callable_vs_fe, norm_fe_difference, rates
from .problem import PROBLEMS, get_problem

logger = logging.getLogger(__name__)

MODES = ("table1", "supercloseness", "interp-study", "lemma-suite", "single-run")
SOLVERS = ("bicgstab", "banded", "direct")


@dataclass
class StudyConfig:
    epsilons: list[float] = field(default_factory=lambda: [10.0**-k for k in range(2, 9)])
    Ns: list[int] = field(default_factory=lambda: [8, 16, 32, 64, 128, 256])
    sigma: float = 2.5
    beta: float = 1.0
    solver_tol: float = 1e-12
    assembly_order: int = 4
    norm_order: int = 5
    problem: str = "paper-s5"
    output_path: str | None = None
    mode: str = "table1"
    seed: int = 20240601
    audit_quadrature: bool = False
    solver: str = "bicgstab"
    jobs: int = 1
    timings: bool = False
    # None: strict everywhere except table1, whose reference grid breaks the mesh assumptions
    strict: bool | None = None

    @property
    def is_strict(self) -> bool:
        return self.mode != "table1" if self.strict is None else self.strict

    def validate(self) -> "StudyConfig":
        """Raise InvalidConfigError before any computation if the sweep is ill-posed."""
        if self.mode not in MODES:
            raise InvalidConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.problem not in PROBLEMS:
            raise InvalidConfigError(f"unknown problem {self.problem!r}")
        if self.solver not in SOLVERS:
            raise InvalidConfigError(f"solver must be one of {SOLVERS}")
        if not self.Ns or not self.epsilons:
            raise InvalidConfigError("need at least one eps and one N")
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise InvalidConfigError(f"Ns must be strictly increasing, got {self.Ns}")
        for e in self.epsilons:
            if not 0 < e < 1:
                raise InvalidConfigError(f"eps must lie in (0, 1), got {e}")
        if self.solver_tol <= 0:
            raise InvalidConfigError("solver tolerance must be positive")
        if self.assembly_order < 2:
            raise InvalidConfigError("assembly quadrature order must be >= 2")
        if self.norm_order < 2:
            raise InvalidConfigError("norm quadrature order must be >= 2")
        if self.jobs < 1:
            raise InvalidConfigError("jobs must be >= 1")
        for N in self.Ns:
            MeshConfig(N, self.epsilons[0], self.sigma, self.beta, strict=False).check()
        bad = self.violations()
        if bad and self.is_strict:
            e, N = bad[0]
            raise InvalidConfigError(f"(eps={e:g}, N={N}) violates the mesh assumptions; {len(bad)} pair(s) in total")
        return self

    def violations(self) -> list[tuple[float, int]]:
        return [(e, N) for e in self.epsilons for N in self.Ns if not satisfies_assumptions(N, e, self.sigma, self.beta)]

    @classmethod
    def from_mapping(cls, data: dict) -> "StudyConfig":
        """Build from string values, e.g. a parsed key=value file."""
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in data.items():
            name = key.replace("-", "_")
            if name == "out":
                name = "output_path"
            if name not in known:
                raise InvalidConfigError(f"unknown config key {key!r}")
            kw[name] = _coerce(name, raw)
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, raw):
    if not isinstance(raw, str):
        return raw
    try:
        if name == "epsilons":
            return [float(t) for t in raw.replace(",", " ").split()]
        if name == "Ns":
            return [int(t) for t in raw.replace(",", " ").split()]
        if name in ("sigma", "beta", "solver_tol"):
            return float(raw)
        if name in ("assembly_order", "norm_order", "seed", "jobs"):
            return int(raw)
        if name in ("audit_quadrature", "timings", "strict"):
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
    except ValueError as exc:
        raise InvalidConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw.strip()


def parse_config_file(path: str | Path) -> dict:
    """key = value lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"{path}:{lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# -- one (eps, N) point ----------------------------------------------------------


@dataclass
class PointResult:
    record: ErrorRecord
    audit: dict = field(default_factory=dict)
    interp_gap: float = math.nan  # ||u^I - Pi u||_eps


def discretize(cfg: StudyConfig, epsilon: float, N: int, assembly_order: int | None = None):
    mesh = build_mesh(MeshConfig(N, epsilon, cfg.sigma, cfg.beta, strict=cfg.is_strict))
    cs, ms = get_problem(cfg.problem, epsilon)
    A, F = assemble(mesh, cs, QuadratureRule.gauss(assembly_order or cfg.assembly_order))
    return mesh, cs, ms, A, F


def run_point(cfg: StudyConfig, epsilon: float, N: int) -> PointResult:
    t0 = time.perf_counter()
    mesh, cs, ms, A, F = discretize(cfg, epsilon, N)
    try:
        uN = FEFunction.from_interior(mesh, solve(A, F, cfg.solver_tol, cfg.solver))
    except SolverError as exc:
        logger.warning("eps=%g N=%d: %s (residual %.2e)", epsilon, N, exc, exc.residual)
        rec = ErrorRecord(epsilon, N, math.nan, wall_time=time.perf_counter() - t0, failure=str(exc))
        return PointResult(rec)
    bundle = build_Piu(ms, mesh)
    norm_rule = QuadratureRule.gauss(cfg.norm_order)
    rec = ErrorRecord(
        epsilon,
        N,
        err_energy=norm_fe_difference(bundle.uI, uN).energy,
        err_superclose=norm_fe_difference(bundle.Piu, uN).energy,
        err_L2=norm_callable_vs_fe(ms, uN, norm_rule).L2,
        err_interp_L2=norm_callable_vs_fe(ms, bundle.uI, norm_rule).L2,
    )
    rec.wall_time = time.perf_counter() - t0
    out = PointResult(rec, interp_gap=norm_fe_difference(bundle.uI, bundle.Piu).energy)
    if cfg.audit_quadrature:
        out.audit = audit_point(cfg, epsilon, N, uN, rec)
    return out


def audit_point(cfg: StudyConfig, epsilon: float, N: int, uN: FEFunction, rec: ErrorRecord) -> dict:
    """Sensitivity of the recorded errors to the quadrature orders."""
    _, ms = get_problem(cfg.problem, epsilon)
    l2_hi = norm_callable_vs_fe(ms, uN, QuadratureRule.gauss(7)).L2
    en_hi = norm_callable_vs_fe(ms, uN, QuadratureRule.gauss(7)).energy
    en_lo = norm_callable_vs_fe(ms, uN, QuadratureRule.gauss(5)).energy
    mesh, _, _, A, F = discretize(cfg, epsilon, N, cfg.assembly_order + 2)
    uN_hi = FEFunction.from_interior(mesh, solve(A, F, cfg.solver_tol, cfg.solver))
    uI = build_Piu(ms, mesh).uI
    e_hi = norm_fe_difference(uI, uN_hi).energy
    return {
        "norm_L2_5_vs_7": abs(rec.err_L2 - l2_hi) / l2_hi,
        "norm_energy_5_vs_7": abs(en_lo - en_hi) / en_hi,
        "assembly_order_plus2": abs(rec.err_energy - e_hi) / e_hi,
    }


def _point_task(args):
    cfg, e, N = args
    return run_point(cfg, e, N)


def sweep(cfg: StudyConfig) -> dict[tuple[float, int], PointResult]:
    """All (eps, N) points; results are keyed and later ordered by (eps, N)."""
    tasks = [(cfg, e, N) for e in cfg.epsilons for N in cfg.Ns]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_point_task, tasks))
    else:
        results = [_point_task(t) for t in tasks]
    return {(t[1], t[2]): r for t, r in zip(tasks, results)}


def build_reports(cfg: StudyConfig, points: dict) -> list[ConvergenceReport]:
    reports = []
    for e in cfg.epsilons:
        rep = ConvergenceReport(e, [points[(e, N)].record for N in cfg.Ns])
        try:
            rates(rep)
        except RateError:
            rep.rates = {}
        reports.append(rep)
    return reports


# -- modes -----------------------------------------------------------------------


@dataclass
class StudyOutcome:
    mode: str
    lines: list[str]
    results: list = field(default_factory=list)
    reports: list[ConvergenceReport] = field(default_factory=list)
    csv: str = ""
    table: str = ""
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def run_table1(cfg: StudyConfig) -> StudyOutcome:
    t0 = time.perf_counter()
    bad = cfg.violations()
    if bad:
        logger.warning("%d (eps, N) pairs break the mesh assumptions; the y-mesh falls back to uniform where its layer would not fit", len(bad))
    points = sweep(cfg)
    reports = build_reports(cfg, points)
    elapsed = time.perf_counter() - t0
    csv = convergence_csv(reports, timings=cfg.timings)
    table = aligned_table(reports, "err_energy")
    results = checks.compare_table1(reports)
    lines = [table, "supercloseness ||Pi u - u^N||_eps:", aligned_table(reports, "err_superclose")]
    lines += [r.line() for r in results]
    for (e, N) in bad:
        lines.append(f"note: eps={e:g}, N={N} breaks the mesh assumptions")
    if cfg.audit_quadrature:
        for (e, N), p in points.items():
            if p.audit:
                lines.append(f"audit eps={e:g} N={N}: " + ", ".join(f"{k}={v:.2e}" for k, v in p.audit.items()))
    failures = [p.record for p in points.values() if p.record.failure]
    for r in failures:
        lines.append(f"solver failure eps={r.epsilon:g} N={r.N}: {r.failure}")
    lines.append(f"elapsed {elapsed:.1f} s")
    out = StudyOutcome("table1", lines, results, reports, csv, table, elapsed, {"points": points})
    _write_outputs(cfg, out)
    return out


def bound_envelope(epsilon: float, N: int) -> tuple[float, float]:
    """The two terms eps^(1/4) N^(-3/2) ln^(1/2) N and N^(-2) ln^(1/2) N."""
    r = math.sqrt(math.log(N))
    return epsilon**0.25 * N**-1.5 * r, N**-2.0 * r


def run_supercloseness(cfg: StudyConfig) -> StudyOutcome:
    t0 = time.perf_counter()
    points = sweep(cfg)
    reports = build_reports(cfg, points)
    lines, results, extra = [], [], {}
    for rep in reports:
        e = rep.epsilon
        errs = rep.column("err_superclose")
        rows = []
        tri_ok = True
        for N, err in zip(rep.Ns, errs):
            p = points[(e, N)]
            t_eps, t_N = bound_envelope(e, N)
            env = max(t_eps, t_N)
            tri_ok &= err <= p.record.err_energy + p.interp_gap + 1e-14
            rows.append({
                "N": N, "err": err, "envelope": env, "dominant": "eps^(1/4)N^(-3/2)" if t_eps > t_N else "N^(-2)",
                "C": err / env, "interp_gap_N2": p.interp_gap * N**2,
            })
        extra[e] = rows
        lines.append(f"eps={e:g}")
        lines += [
            f"  N={r['N']:>4}  err={r['err']:.3e}  envelope={r['envelope']:.3e} ({r['dominant']})  C={r['C']:.3f}  "
            f"N^2 ||u^I - Pi u||={r['interp_gap_N2']:.3f}"
            for r in rows
        ]
        cs = [r["C"] for r in rows]
        lines.append(f"  implied constant spread {max(cs) / min(cs):.3f}")
        results.append(checks.CheckResult(f"triangle inequality, eps={e:g}", bool(tri_ok), 0.0, "holds at every N"))
        if len(rep.Ns) >= 2:
            s = fitted_slope(rep.Ns, errs)
            results.append(checks.CheckResult(f"supercloseness slope, eps={e:g}", s >= 1.85, s, ">= 1.85"))
    lines += [r.line() for r in results]
    out = StudyOutcome("supercloseness", lines, results, reports, convergence_csv(reports, cfg.timings),
                       aligned_table(reports, "err_superclose"), time.perf_counter() - t0, extra)
    _write_outputs(cfg, out)
    return out


def run_interp_study(cfg: StudyConfig) -> StudyOutcome:
    t0 = time.perf_counter()
    Ns = [N for N in cfg.Ns if N >= 16] or cfg.Ns
    results = []
    lines = []
    for e in cfg.epsilons:
        sw = checks.tau_sweep(e, Ns)
        for key, label in (("tau", "||tau||_inf"), ("beta", "max|beta|"), ("S-PiS", "||S - Pi S||_inf")):
            lines.append(f"eps={e:g} {label}: " + " ".join(f"{v:.3e}" for v in sw[key]))
        if len(Ns) >= 2:
            results.append(checks.check_tau_slope(e, Ns, sw))
            results.append(checks.check_S_PiS_slope(e, Ns, sw))
            results.append(checks.check_E1_slope(e, Ns))
    lines += [r.line() for r in results]
    out = StudyOutcome("interp-study", lines, results, elapsed=time.perf_counter() - t0)
    _write_outputs(cfg, out)
    return out


def run_lemma_suite(cfg: StudyConfig) -> StudyOutcome:
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    grid = checks.valid_grid(cfg.epsilons, cfg.Ns, cfg.sigma, cfg.beta)
    if not grid:
        raise InvalidConfigError("no (eps, N) pair of the sweep satisfies the mesh assumptions")
    slope_Ns = [N for N in cfg.Ns if N >= 16] or cfg.Ns
    results = [
        checks.check_mesh_lemmas(grid),
        checks.check_decomposition(cfg.epsilons),
        checks.check_tau_slope(1e-4, slope_Ns),
        checks.check_S_PiS_slope(1e-4, slope_Ns),
        checks.check_lemma3_slopes(1e-4, slope_Ns),
        checks.check_E1_slope(1e-6, slope_Ns),
        checks.check_E1_constants([p for p in grid if p[1] >= 16] or grid),
        checks.check_QE1_constants([p for p in grid if p[1] >= 16] or grid),
        checks.check_tridiagonal_bound(rng),
        checks.check_integral_identities(rng, grid=grid),
        checks.check_lagrange_stability(rng),
        checks.check_element_matrices(),
    ]
    out = StudyOutcome("lemma-suite", [r.line() for r in results], results, elapsed=time.perf_counter() - t0)
    _write_outputs(cfg, out)
    return out


def run_single(cfg: StudyConfig) -> StudyOutcome:
    e, N = cfg.epsilons[0], cfg.Ns[0]
    p = run_point(cfg, e, N)
    r = p.record
    lines = [
        f"eps={e:g} N={N}",
        f"  ||u^I - u^N||_eps  = {r.err_energy:.6e}",
        f"  ||Pi u - u^N||_eps = {r.err_superclose:.6e}",
        f"  ||u - u^N||        = {r.err_L2:.6e}",
        f"  ||u - u^I||        = {r.err_interp_L2:.6e}",
        f"  wall time          = {r.wall_time:.3f} s",
    ]
    if r.failure:
        lines.append(f"  solver failure: {r.failure}")
    lines += [f"  audit {k} = {v:.3e}" for k, v in p.audit.items()]
    res = [checks.CheckResult("solve", r.failure is None, r.err_energy, "finite error")]
    rep = ConvergenceReport(e, [r])
    out = StudyOutcome("single-run", lines, res, [rep], convergence_csv([rep], cfg.timings), elapsed=r.wall_time)
    _write_outputs(cfg, out)
    return out


RUNNERS = {
    "table1": run_table1,
    "supercloseness": run_supercloseness,
    "interp-study": run_interp_study,
    "lemma-suite": run_lemma_suite,
    "single-run": run_single,
}


def run(cfg: StudyConfig) -> StudyOutcome:
    cfg.validate()
    return RUNNERS[cfg.mode](cfg)


def _write_outputs(cfg: StudyConfig, out: StudyOutcome) -> None:
    """CSV at ``output_path`` (when the mode produces one) and the text report next to it."""
    if not cfg.output_path:
        return
    path = Path(cfg.output_path)
    if out.csv:
        write_text(path, out.csv)
        write_text(path.with_suffix(".txt"), "\n".join(out.lines) + "\n")
    else:
        write_text(path, "\n".join(out.lines) + "\n")
