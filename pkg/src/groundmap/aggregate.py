"""Summary statistics and calibration-placement heatmaps over records."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConfigError, InsufficientData

PERCENTILES = (1, 25, 50, 75, 99)


@dataclass(frozen=True)
class MethodStats:
    method: str
    n_total: int
    n_valid: int
    flagged: dict
    frac_positive_path: float
    frac_positive_calib: float
    mean_path: float
    median_path: float
    std_path: float
    mean_calib: float
    median_calib: float
    std_calib: float
    pearson: Optional[float]
    spearman: Optional[float]
    path_percentiles: dict
    calib_percentiles: dict
    notes: tuple = ()


@dataclass(frozen=True)
class AggregateStats:
    methods: dict = field(default_factory=dict)
    improvement_formula: str = ""

    def to_json(self) -> dict:
        return {
            "improvement_formula": self.improvement_formula,
            "methods": {k: asdict(v) for k, v in sorted(self.methods.items())},
        }


def pearson(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientData("correlation needs at least 2 records")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise InsufficientData("correlation undefined for constant input")
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))
    if not denom > 0.0:
        raise InsufficientData("correlation undefined for (numerically) constant input")
    return float(np.clip((xc @ yc) / denom, -1.0, 1.0))


def spearman(x, y) -> float:
    return pearson(stats.rankdata(x), stats.rankdata(y))


def _method_stats(method: str, recs: list) -> MethodStats:
    valid = [r for r in recs if r.valid]
    flagged = {}
    for r in recs:
        if not r.valid:
            flagged[r.flag] = flagged.get(r.flag, 0) + 1
    if not valid:
        raise InsufficientData(f"no valid records for method {method!r}")
    path = np.array([r.path_improvement for r in valid])
    calib = np.array([r.calib_improvement for r in valid])
    ddof = 1 if len(valid) > 1 else 0
    notes = []
    try:
        r_p = pearson(calib, path)
        r_s = spearman(calib, path)
    except InsufficientData as exc:
        r_p = r_s = None
        notes.append(f"correlation: {exc}")
    return MethodStats(
        method=method,
        n_total=len(recs),
        n_valid=len(valid),
        flagged=dict(sorted(flagged.items())),
        frac_positive_path=float(np.mean(path > 0)),
        frac_positive_calib=float(np.mean(calib > 0)),
        mean_path=float(path.mean()),
        median_path=float(np.median(path)),
        std_path=float(path.std(ddof=ddof)),
        mean_calib=float(calib.mean()),
        median_calib=float(np.median(calib)),
        std_calib=float(calib.std(ddof=ddof)),
        pearson=r_p,
        spearman=r_s,
        path_percentiles={str(q): float(v) for q, v in zip(PERCENTILES, np.percentile(path, PERCENTILES))},
        calib_percentiles={str(q): float(v) for q, v in zip(PERCENTILES, np.percentile(calib, PERCENTILES))},
        notes=tuple(notes),
    )


def _canonical(records) -> list:
    return sorted(records, key=lambda r: (r.method, r.variant_id, r.calib_ids))


def aggregate(records, improvement_formula: str = "") -> AggregateStats:
    """Per-method statistics over valid records. Flagged records are counted
    but excluded. The result does not depend on record order."""
    records = _canonical(records)
    if not records:
        raise InsufficientData("no records")
    by_method = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    return AggregateStats({m: _method_stats(m, rs) for m, rs in by_method.items()}, improvement_formula)


def default_bins(values, n: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n + 1)


def heatmap(records, sum_bins, spread_bins) -> dict:
    """Mean path improvement per (calibration distance sum, spread) cell.

    Bins are edges; the last bin includes its right edge. Empty cells are
    ``None``.
    """
    sum_bins = np.asarray(sum_bins, dtype=float)
    spread_bins = np.asarray(spread_bins, dtype=float)
    valid = [r for r in _canonical(records) if r.valid]
    total = np.zeros((len(sum_bins) - 1, len(spread_bins) - 1))
    count = np.zeros_like(total, dtype=int)
    for r in valid:
        i = _bin_index(sum_bins, r.calib_sum)
        j = _bin_index(spread_bins, r.calib_spread)
        total[i, j] += r.path_improvement
        count[i, j] += 1
    mean = [[(total[i, j] / count[i, j]) if count[i, j] else None for j in range(count.shape[1])]
            for i in range(count.shape[0])]
    return {
        "sum_edges": sum_bins.tolist(),
        "spread_edges": spread_bins.tolist(),
        "mean_path_improvement": mean,
        "count": count.tolist(),
    }


def _bin_index(edges: np.ndarray, x: float) -> int:
    if not edges[0] - 1e-9 <= x <= edges[-1] + 1e-9:
        raise ConfigError(f"value {x} outside bin range [{edges[0]}, {edges[-1]}]")
    return int(min(max(np.searchsorted(edges, x, side="right") - 1, 0), len(edges) - 2))


def heatmaps_by_method(records, n_sum: int = 8, n_spread: int = 8) -> dict:
    valid = [r for r in records if r.valid]
    if not valid:
        raise InsufficientData("no valid records for heatmap")
    sum_bins = default_bins([r.calib_sum for r in valid], n_sum)
    spread_bins = default_bins([r.calib_spread for r in valid], n_spread)
    methods = sorted({r.method for r in valid})
    return {m: heatmap([r for r in valid if r.method == m], sum_bins, spread_bins) for m in methods}


def table(agg: AggregateStats) -> str:
    """Plain-text comparison table, one column per method."""
    methods = [m for m in ("regression", "gd", "hybrid") if m in agg.methods]
    methods += sorted(set(agg.methods) - set(methods))
    rows = [
        ("Positive path improvement", lambda s: f"{100 * s.frac_positive_path:.1f}%"),
        ("Positive calib. improvement", lambda s: f"{100 * s.frac_positive_calib:.1f}%"),
        ("Mean path improvement", lambda s: f"{s.mean_path:.1f}%"),
        ("Median path improvement", lambda s: f"{s.median_path:.1f}%"),
        ("Std path improvement", lambda s: f"{s.std_path:.1f}"),
        ("Path 1st percentile", lambda s: f"{s.path_percentiles['1']:.1f}%"),
        ("Median calib. improvement", lambda s: f"{s.median_calib:.1f}%"),
        ("Path-calib. correlation", lambda s: "n/a" if s.pearson is None else f"{s.pearson:.2f}"),
        ("Path-calib. Spearman", lambda s: "n/a" if s.spearman is None else f"{s.spearman:.2f}"),
        ("Valid / total records", lambda s: f"{s.n_valid}/{s.n_total}"),
    ]
    width = max(len(r[0]) for r in rows) + 2
    lines = ["Metric".ljust(width) + "".join(m.rjust(14) for m in methods)]
    lines.append("-" * len(lines[0]))
    for label, fmt in rows:
        lines.append(label.ljust(width) + "".join(fmt(agg.methods[m]).rjust(14) for m in methods))
    return "\n".join(lines) + "\n"
