"""Plain-text writers: convergence CSV, aligned table, mesh dump, Matrix Market."""
from __future__ import annotations

import math
from pathlib import Path

import scipy.io

from .norms import ConvergenceReport

CSV_HEADER = "epsilon,N,err_energy_uI_uN,rate,err_superclose_Piu_uN,rate,err_L2,wall_ms"


def _sci(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else f"{v:.5e}"


def convergence_csv(reports: list[ConvergenceReport], timings: bool = False) -> str:
    """CSV rows ordered by (eps, N).  ``rate`` on row N is log2(e_N / e_2N).

    Wall times are left blank unless ``timings`` is set so that repeated runs
    produce identical files.
    """
    lines = [CSV_HEADER]
    for rep in reports:
        r_en = rep.rates.get("err_energy", [])
        r_sc = rep.rates.get("err_superclose", [])
        for k, rec in enumerate(rep.records):
            rate_en = r_en[k] if k < len(r_en) else math.nan
            rate_sc = r_sc[k] if k < len(r_sc) else math.nan
            wall = f"{1e3 * rec.wall_time:.1f}" if timings else ""
            lines.append(
                ",".join([
                    f"{rep.epsilon:.5e}", str(rec.N), _sci(rec.err_energy), _sci(rate_en),
                    _sci(rec.err_superclose), _sci(rate_sc), _sci(rec.err_L2), wall,
                ])
            )
    return "\n".join(lines) + "\n"


def aligned_table(reports: list[ConvergenceReport], column: str = "err_energy") -> str:
    """Errors as eps rows by N columns with the rates printed underneath."""
    if not reports:
        return ""
    Ns = reports[0].Ns
    width = 11
    head = f"{'eps':>8} |" + "".join(f"{N:>{width}}" for N in Ns)
    out = [head, "-" * len(head)]
    for rep in reports:
        vals = rep.column(column)
        out.append(f"{rep.epsilon:>8.0e} |" + "".join(f"{v:>{width}.3E}" for v in vals))
        rts = rep.rates.get(column, [])
        cells = [f"{r:>{width}.2f}" if math.isfinite(r) else f"{'nan':>{width}}" for r in rts]
        cells += [f"{'---':>{width}}"] * (len(Ns) - len(cells))
        out.append(f"{'':>8} |" + "".join(cells))
    return "\n".join(out) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def write_matrix_market(path: str | Path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), A, comment=comment)
