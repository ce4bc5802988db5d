"""Command-line harness.

    bakhvalov-fem --mode table1 --out results/table1.csv
    bakhvalov-fem --mode lemma-suite --seed 7
    bakhvalov-fem --config study.cfg --Ns 16,32,64

Exit codes: 0 all checks pass, 1 some acceptance check failed, 2 invalid
configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .export import write_matrix_market, write_text
from .fem import QuadratureRule
from .interpolation import build_PiS
from .mesh import InvalidConfigError, MeshConfig, build_mesh
from .problem import get_problem
from .study import MODES, SOLVERS, StudyConfig, discretize, parse_config_file, run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# flag dest -> StudyConfig field
_FIELDS = {
    "mode": "mode", "epsilons": "epsilons", "Ns": "Ns", "sigma": "sigma", "beta": "beta",
    "solver_tol": "solver_tol", "assembly_order": "assembly_order", "norm_order": "norm_order",
    "out": "output_path", "seed": "seed", "audit_quadrature": "audit_quadrature", "solver": "solver",
    "jobs": "jobs", "timings": "timings", "strict": "strict", "problem": "problem",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bakhvalov-fem", description="Bilinear FEM on a Bakhvalov-type mesh: convergence and verification studies.")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--epsilons", help="comma separated, e.g. 1e-4,1e-6")
    p.add_argument("--Ns", help="comma separated, e.g. 16,32,64")
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--solver-tol", type=float)
    p.add_argument("--assembly-order", type=int)
    p.add_argument("--norm-order", type=int)
    p.add_argument("--out", help="CSV (or report) path; a .txt report is written alongside")
    p.add_argument("--seed", type=int)
    p.add_argument("--audit-quadrature", action="store_true", default=None)
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--problem")
    p.add_argument("--solver", choices=SOLVERS)
    p.add_argument("--jobs", type=int)
    p.add_argument("--timings", action="store_true", default=None, help="fill the wall_ms CSV column")
    strict = p.add_mutually_exclusive_group()
    strict.add_argument("--strict", dest="strict", action="store_true", default=None, help="reject (eps, N) pairs breaking the mesh assumptions")
    strict.add_argument("--no-strict", dest="strict", action="store_false")
    p.add_argument("--dump-mesh", metavar="PATH", help="write the mesh of the first (eps, N) as CSV")
    p.add_argument("--dump-tau", metavar="PATH", help="write the correction system of the first (eps, N) as CSV")
    p.add_argument("--dump-matrix", metavar="PATH", help="write the system matrix of the first (eps, N) in Matrix Market format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> StudyConfig:
    values = parse_config_file(args.config) if args.config else {}
    for dest, name in _FIELDS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[name] = v
    return StudyConfig.from_mapping(values).validate()


def _dumps(cfg: StudyConfig, args) -> None:
    if not (args.dump_mesh or args.dump_tau or args.dump_matrix):
        return
    e, N = cfg.epsilons[0], cfg.Ns[0]
    mesh = build_mesh(MeshConfig(N, e, cfg.sigma, cfg.beta, strict=cfg.is_strict))
    if args.dump_mesh:
        write_text(args.dump_mesh, mesh.to_csv())
    if args.dump_tau:
        _, ms = get_problem(cfg.problem, e)
        _, system = build_PiS(ms.S, mesh, QuadratureRule.gauss(6), return_system=True)
        write_text(args.dump_tau, system.to_csv())
    if args.dump_matrix:
        _, _, _, A, _ = discretize(cfg, e, N)
        write_matrix_market(args.dump_matrix, A, comment=f"eps={e:g} N={N}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        _dumps(cfg, args)
        outcome = run(cfg)
    except InvalidConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(outcome.lines))
    return EXIT_OK if outcome.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
