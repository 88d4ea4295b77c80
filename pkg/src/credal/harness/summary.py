"""Order-insensitive aggregation of result rows into a JSON-ready summary."""

from __future__ import annotations

import math
from typing import Any, Mapping, Optional, Sequence

import numpy as np

_Z95 = 1.959963984540054

_META_KEYS = {"experiment", "config_hash", "seed"}


class SummaryError(ValueError):
    """Rows cannot be aggregated (empty input, mixed experiments, ...)."""


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1 or not 0 <= successes <= trials:
        raise SummaryError(f"invalid counts: {successes}/{trials}")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _quantile(sorted_vals: np.ndarray, q: float) -> float:
    return float(np.quantile(sorted_vals, q))


def _aggregate(rows: Sequence[Mapping[str, Any]]) -> dict:
    metrics: dict[str, dict] = {}
    keys = sorted({k for row in rows for k in row} - _META_KEYS)
    for key in keys:
        vals = [row[key] for row in rows if key in row and isinstance(row[key], (int, float))]
        if not vals:
            continue
        arr = np.sort(np.asarray(vals, dtype=float))
        entry = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "median": _quantile(arr, 0.5),
            "q90": _quantile(arr, 0.90),
            "q95": _quantile(arr, 0.95),
            "q99": _quantile(arr, 0.99),
        }
        if set(np.unique(arr)) <= {0.0, 1.0}:
            lo, hi = wilson_interval(int(arr.sum()), int(arr.size))
            entry["wilson_low"] = lo
            entry["wilson_high"] = hi
        metrics[key] = entry
    return metrics


def summarize(
    rows: Sequence[Mapping[str, Any]],
    group_by: Optional[str] = None,
) -> dict:
    """Per-metric mean/median/q90/q95/q99 (plus Wilson 95% CI for 0/1 metrics).

    Rows must all belong to one experiment.  With ``group_by`` the same
    aggregation is additionally computed per value of that column.  The
    result is independent of row order.
    """
    if not rows:
        raise SummaryError("cannot summarize zero rows")
    experiments = {row.get("experiment") for row in rows}
    if len(experiments) != 1:
        raise SummaryError(f"rows mix experiments: {sorted(map(str, experiments))}")
    out = {
        "experiment": next(iter(experiments)),
        "rows": len(rows),
        "metrics": _aggregate(rows),
    }
    hashes = {row.get("config_hash") for row in rows if "config_hash" in row}
    if len(hashes) == 1:
        out["config_hash"] = next(iter(hashes))
    if group_by is not None:
        groups: dict = {}
        for row in rows:
            groups.setdefault(row[group_by], []).append(row)
        out["groups"] = {
            str(value): _aggregate(members) for value, members in sorted(groups.items())
        }
        out["group_by"] = group_by
    return out
