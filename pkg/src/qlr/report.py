"""CSV report schema shared by the decompose and sweep commands.

One row per (run, outer iteration); reals are printed with 17 significant
digits so parsing the CSV recovers the exact float64 values.
"""

from __future__ import annotations

from pathlib import Path

from .matfile import atomic_write_text
from .optimizer import Trajectory

REPORT_HEADER = "seed,strategy,rank,k,q_bits,lr_bits,iter,q_scale,norm_q,norm_lr,act_err"

_INT_FIELDS = ("seed", "rank", "k", "q_bits", "lr_bits", "iter")
_REAL_FIELDS = ("q_scale", "norm_q", "norm_lr", "act_err")


def format_real(x: float) -> str:
    return format(float(x), ".17g")


def lr_bits_label(lr_bits: int | None) -> int:
    """Full-precision factors are reported as 16 in flags and reports."""
    return 16 if lr_bits is None else int(lr_bits)


def trajectory_rows(
    traj: Trajectory,
    *,
    seed: int,
    strategy: str,
    rank: int,
    k: int,
    q_bits: int,
    lr_bits: int | None,
) -> list[str]:
    """Render one run as CSV rows; k is 0 for strategies without a selection."""
    prefix = f"{seed},{strategy},{rank},{k},{q_bits},{lr_bits_label(lr_bits)}"
    return [
        f"{prefix},{rec.t},{format_real(rec.q_scale)},{format_real(rec.norm_q)},"
        f"{format_real(rec.norm_lr)},{format_real(rec.act_err)}"
        for rec in traj.records
    ]


def write_report(path, rows: list[str]) -> None:
    atomic_write_text(path, "\n".join([REPORT_HEADER, *rows]) + "\n")


def read_report(path) -> list[dict]:
    """Parse a report back into dicts with exact numeric values."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ValueError(f"bad report header: {lines[0] if lines else '<empty>'!r}")
    names = REPORT_HEADER.split(",")
    out = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(names):
            raise ValueError(f"bad report row: {line!r}")
        row = dict(zip(names, parts))
        for f in _INT_FIELDS:
            row[f] = int(row[f])
        for f in _REAL_FIELDS:
            row[f] = float(row[f])
        out.append(row)
    return out


def summarize(final_errs: dict[tuple[str, int, int], float], strategies: list[str]) -> str:
    """Per-strategy mean final error and win rate against zero initialization.

    final_errs maps (strategy, rank, seed) -> final act_err.
    """
    cells = sorted({(rank, seed) for (_, rank, seed) in final_errs})
    lines = ["strategy,mean_final_act_err,win_rate_vs_zero"]
    for strat in strategies:
        errs = [final_errs[(strat, rank, seed)] for rank, seed in cells]
        mean = sum(errs) / len(errs)
        if strat != "zero" and any(s == "zero" for s in strategies):
            wins = sum(
                final_errs[(strat, rank, seed)] < final_errs[("zero", rank, seed)]
                for rank, seed in cells
            )
            rate = format(wins / len(cells), ".4f")
        else:
            rate = "-"
        lines.append(f"{strat},{format_real(mean)},{rate}")
    return "\n".join(lines) + "\n"
