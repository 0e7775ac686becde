"""Grouped summaries of sweep rows: mean and standard deviation per strategy and scenario."""

from __future__ import annotations

import csv
import io
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .sweep import ResultRow


@dataclass(frozen=True)
class Cell:
    mean: float
    std: float
    count: int

    def __str__(self) -> str:
        return f"{100 * self.mean:.1f} ± {100 * self.std:.1f}"


def scenario_of(row: ResultRow) -> str:
    fail = "no-failure" if row.lam is None else f"lam={row.lam:g},k={row.k:g}"
    return f"{fail} n={row.n}"


def strategy_label(row: ResultRow) -> str:
    label = row.strategy
    if row.strategy == "periodic":
        label += f"(P={row.period})"
    elif row.strategy in ("proid", "proid_safe") and row.alpha != 2.0:
        label += f"(a={row.alpha:g})"
    if not row.handoff:
        label += " -handoff"
    if not row.sharing:
        label += " -sharing"
    return label


def _sort_key(text: str):
    # numbers compare numerically inside labels, so n=10 sorts after n=9
    parts, num = [], ""
    for ch in text + "\0":
        if ch.isdigit() or (ch == "." and num):
            num += ch
            continue
        if num:
            parts.append((0, float(num.rstrip(".")), ""))
            num = ""
        parts.append((1, 0.0, ch))
    return parts


def aggregate(rows: Sequence[ResultRow]) -> dict[tuple[str, str], Cell]:
    groups: dict[tuple[str, str], list[float]] = defaultdict(list)
    for row in rows:
        if row.ok and row.coverage_ratio is not None:
            groups[(strategy_label(row), scenario_of(row))].append(row.coverage_ratio)
    out = {}
    for key, vals in groups.items():
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        out[key] = Cell(statistics.fmean(vals), std, len(vals))
    return out


def table(rows: Sequence[ResultRow]) -> tuple[list[str], list[str], dict]:
    agg = aggregate(rows)
    strategies = sorted({s for s, _ in agg}, key=_sort_key)
    scenarios = sorted({c for _, c in agg}, key=_sort_key)
    return strategies, scenarios, agg


def format_table(rows: Sequence[ResultRow]) -> str:
    """Coverage (%) at mission end, strategies down, scenarios across; best per column marked."""
    if not rows:
        raise ValueError("no rows to report")
    strategies, scenarios, agg = table(rows)
    best = {}
    for sc in scenarios:
        vals = [agg[(s, sc)].mean for s in strategies if (s, sc) in agg]
        best[sc] = max(vals) if vals else None
    header = ["strategy"] + scenarios
    body = []
    for s in strategies:
        line = [s]
        for sc in scenarios:
            cell = agg.get((s, sc))
            if cell is None:
                line.append("-")
            else:
                line.append(str(cell) + (" *" if cell.mean == best[sc] else ""))
        body.append(line)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*r) for r in body]
    n_err = sum(not r.ok for r in rows)
    if n_err:
        lines.append(f"({n_err} run(s) failed; see the error column)")
    return "\n".join(lines) + "\n"


def summary_csv(rows: Sequence[ResultRow]) -> str:
    strategies, scenarios, agg = table(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "scenario", "mean", "std", "count"])
    for s in strategies:
        for sc in scenarios:
            cell = agg.get((s, sc))
            if cell is not None:
                w.writerow([s, sc, repr(cell.mean), repr(cell.std), cell.count])
    return buf.getvalue()
