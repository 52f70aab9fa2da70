"""Interval grids for the exponential rate and the normal variance at theta_hat = 1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import Inference
from .univariate import exponential_model, normal_variance_model

__all__ = ["TableRow", "TABLES", "interval_table", "format_table"]

# method label, interval method
ROW_METHODS = (
    ("First-order", "ML"),
    ("Adjusted first-order", "MBR"),
    ("Third-order", "QBR"),
    ("Exact", "EXACT"),
)
LEVELS = (0.90, 0.95, 0.99)
TABLES = {
    "table1": ("exponential", (3, 5, 7)),
    "table2": ("normal_variance", (10, 15, 20)),
}


@dataclass(frozen=True)
class TableRow:
    n: int
    label: str
    method: str
    level: float
    lo: float
    hi: float


def _unit_sample(family: str, n: int):
    # the MLE depends on the data only through sum(y) or sum(y^2); a vector
    # of ones gives theta_hat = 1 in both models
    y = np.ones(n)
    if family == "exponential":
        return exponential_model(y)
    return normal_variance_model(y)


def interval_table(which: str, ns=None, levels=LEVELS) -> list[TableRow]:
    """All four interval methods at each n and level for a sample with MLE 1."""
    try:
        family, default_ns = TABLES[which]
    except KeyError:
        raise ValueError(f"unknown table {which!r}; choose from {', '.join(TABLES)}") from None
    rows = []
    for n in ns or default_ns:
        if int(n) != n or n < 2:
            raise ValueError(f"sample size must be an integer >= 2, got {n}")
        inf = Inference(_unit_sample(family, int(n)))
        for label, method in ROW_METHODS:
            for level in levels:
                ci = inf.interval(0, level, "two-sided", method)
                rows.append(TableRow(int(n), label, method, level, ci.lo, ci.hi))
    return rows


def format_table(rows: list[TableRow], digits: int = 2) -> str:
    levels = sorted({r.level for r in rows})
    head = f"{'n':>4}  {'':<22}" + "".join(f"{f'{100 * lv:g}%':>18}" for lv in levels)
    out = [head]
    cell = {(r.n, r.label, r.level): r for r in rows}
    for n in sorted({r.n for r in rows}):
        for label, _ in ROW_METHODS:
            if (n, label, levels[0]) not in cell:
                continue
            parts = []
            for lv in levels:
                r = cell[(n, label, lv)]
                parts.append(f"{f'[{r.lo:.{digits}f}, {r.hi:.{digits}f}]':>18}")
            out.append(f"{n:>4}  {label:<22}" + "".join(parts))
        out.append("")
    return "\n".join(out).rstrip() + "\n"
