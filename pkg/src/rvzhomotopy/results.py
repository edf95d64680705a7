"""Result files: per-step history CSV, flat summary JSON, comparison tables.

History columns are fixed (see ``HISTORY_COLUMNS``) and written with 17
significant digits so a round trip through the CSV is lossless.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .sim import HISTORY_COLUMNS, RunMetrics

FLOAT_FMT = "%.17g"

SUMMARY_METRICS = (
    ("terminal_miss", "miss_km", "{:.4e}"),
    ("total_delta_v", "dv_km_s", "{:.6e}"),
    ("fuel_penalty_pct", "penalty_%", "{:.3f}"),
    ("solve_success_rate", "success", "{:.4f}"),
    ("solve_time_mean", "t_mean_ms", "{:.2f}"),
    ("solve_time_max", "t_max_ms", "{:.2f}"),
)


def write_history(path, metrics: RunMetrics) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        np.savetxt(fh, metrics.history, delimiter=",", fmt=FLOAT_FMT)


def read_history(path) -> tuple[list, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_summary(path, summary: dict) -> None:
    flat = {k: float(v) for k, v in summary.items()}
    with open(path, "w") as fh:
        json.dump(flat, fh, indent=2, sort_keys=True)
        fh.write("\n")


def one_line(variant: str, summary: dict) -> str:
    pen = summary.get("fuel_penalty_pct", math.nan)
    return (f"{variant}: miss={summary['terminal_miss']:.4e} km  "
            f"dv={summary['total_delta_v']:.6e} km/s  penalty={pen:.3f}%  "
            f"success={summary['solve_success_rate']:.4f}")


def write_rows(path, rows: list) -> None:
    """Write dict rows as CSV; the column order follows the first row."""
    if not rows:
        Path(path).write_text("")
        return
    cols = list(rows[0])
    for r in rows[1:]:
        cols += [c for c in r if c not in cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def _fmt(v):
    if isinstance(v, float):
        return FLOAT_FMT % v
    return v


def format_table(rows: list, fuel_baseline: float | None = None) -> str:
    """Fixed-width table of the headline metrics (times in ms)."""
    header = ["variant"] + [label for _, label, _ in SUMMARY_METRICS]
    lines = []
    for r in rows:
        cells = [r["variant"]]
        for key, _, fmt in SUMMARY_METRICS:
            v = r.get(key, math.nan)
            if key.startswith("solve_time"):
                v = v * 1e3
            cells.append(fmt.format(v))
        lines.append(cells)
    widths = [max(len(h), *(len(c[i]) for c in lines)) if lines else len(h)
              for i, h in enumerate(header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
           "  ".join("-" * w for w in widths)]
    out += ["  ".join(c.ljust(w) for c, w in zip(cells, widths)) for cells in lines]
    if fuel_baseline is not None:
        out.append(f"open-loop fuel baseline dv = {fuel_baseline:.6e} km/s")
    return "\n".join(out)
