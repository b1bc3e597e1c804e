"""Monte-Carlo evaluation of both correction methods.

For every trapezoid variant and every triplet of calibration positions the
perturbed homography is corrected using only the three calibration samples,
then scored on the scene's test trajectories. Records are produced by pure
per-variant tasks, so any degree of parallelism yields the same output.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import combinations
from typing import Optional

import numpy as np
from .correct_gd import GdConfig, optimize, optimized_homography, quad_vector
from .correct_regression import apply_correction_many, calib_errors, fit_from_samples
from .errors import ConfigError, GroundmapError
from .geometry import Homography, compute_homography, denominators, map_points
from .perturb import TrapezoidVariant
from .simulator import Scene, calibration_points, noisy_pixels, project_many

BASELINE_FLOOR = 1e-12
METHODS = ("regression", "gd")
CSV_HEADER = (
    "variant_id", "method", "calib_ids", "calib_sum", "calib_spread",
    "baseline_path_err", "corrected_path_err", "baseline_calib_err", "corrected_calib_err",
    "path_improvement", "calib_improvement", "flag",
)
NOISE_STREAM = 7919
IMPROVEMENT_FORMULA = "100 * (1 - corrected / baseline), mean Euclidean error"


@dataclass(frozen=True)
class EvaluationRecord:
    variant_id: int
    method: str
    calib_ids: tuple
    calib_sum: float
    calib_spread: float
    baseline_path_err: float
    corrected_path_err: float
    baseline_calib_err: float
    corrected_calib_err: float
    path_improvement: float
    calib_improvement: float
    flag: str = ""

    @property
    def valid(self) -> bool:
        return not self.flag

    def csv_row(self) -> list:
        return [
            str(self.variant_id), self.method, "-".join(map(str, self.calib_ids)),
            *(repr(float(getattr(self, k))) for k in CSV_HEADER[3:11]),
            self.flag,
        ]

    @classmethod
    def from_csv_row(cls, row: dict) -> "EvaluationRecord":
        return cls(
            int(row["variant_id"]), row["method"],
            tuple(int(i) for i in row["calib_ids"].split("-")),
            *(float(row[k]) for k in CSV_HEADER[3:11]),
            row["flag"],
        )


@dataclass(frozen=True)
class EvalConfig:
    methods: tuple = ("regression", "gd")
    n_candidates: int = 10
    hybrid_threshold: float = 75.0
    gd: GdConfig = field(default_factory=GdConfig)
    max_triplets: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if self.n_candidates < 3:
            raise ConfigError("need at least 3 calibration candidates")

    def to_json(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["gd"] = self.gd.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EvalConfig":
        d = dict(d)
        if "gd" in d:
            d["gd"] = GdConfig.from_json(d["gd"])
        return cls(**d)


def improvement(baseline: float, corrected: float) -> tuple:
    """Percent improvement and whether the baseline was too small to define it."""
    if baseline <= BASELINE_FLOOR:
        return 0.0, True
    return 100.0 * (1.0 - corrected / baseline), False


def candidate_distances(scene: Scene, n: int) -> list:
    lo, hi = scene.calib_range
    return [float(d) for d in np.linspace(lo, hi, n)]


def triplets(n: int, limit: Optional[int] = None) -> list:
    out = list(combinations(range(n), 3))
    return out if limit is None else out[:limit]


def _mean_error(pts: np.ndarray, truth: np.ndarray) -> float:
    return float(np.hypot(*(pts - truth).T).mean())


def _beyond_horizon(H: Homography, pixels: np.ndarray, ref) -> bool:
    w = denominators(H, pixels)
    w_ref = denominators(H, ref)[0]
    return bool(np.any(np.abs(w) <= 1e-12) or np.any((w > 0) != (w_ref > 0)))


def _gd_seed(base: int, variant_id: int, triplet_index: int) -> int:
    return int(np.random.SeedSequence([base, variant_id, triplet_index]).generate_state(1)[0])


class VariantContext:
    """Per-variant quantities shared by all triplets. Test-trajectory data
    is held here only for scoring; the correctors never receive it."""

    def __init__(self, variant: TrapezoidVariant, scene: Scene, cfg: EvalConfig):
        self.variant, self.scene, self.cfg = variant, scene, cfg
        self.origin = tuple(scene.camera.origin)
        self.truth = scene.trajectory_points()
        noise = scene.spec.noise_px if scene.spec is not None else 0.0
        rng = np.random.default_rng([NOISE_STREAM, variant.id])
        self.pixels = noisy_pixels(project_many(scene.camera, self.truth), noise, rng)
        self.samples = calibration_points(scene, candidate_distances(scene, cfg.n_candidates), noise, rng)
        self.centroid = variant.src.as_array().mean(axis=0, keepdims=True)
        self.flag = ""
        try:
            self.H = compute_homography(variant.src, variant.dst)
            if _beyond_horizon(self.H, self.pixels, self.centroid):
                raise GroundmapError("trajectory crosses the perturbed horizon")
            self.baseline_path = _mean_error(map_points(self.H, self.pixels), self.truth)
        except GroundmapError:
            self.H, self.baseline_path, self.flag = None, math.nan, "at_horizon"

    def score(self, H: Homography) -> float:
        if _beyond_horizon(H, self.pixels, self.centroid):
            return math.nan
        return _mean_error(map_points(H, self.pixels), self.truth)


def _record(ctx: VariantContext, method, ids, chosen, base_calib, corr_calib, corr_path, flag=""):
    d = [s.truth[1] for s in chosen]
    base_path = ctx.baseline_path
    if flag or math.isnan(corr_path):
        flag = flag or "at_horizon"
        path_imp = calib_imp = math.nan
    else:
        path_imp, undef_p = improvement(base_path, corr_path)
        calib_imp, undef_c = improvement(base_calib, corr_calib)
        if undef_p or undef_c:
            flag = "undefined_baseline"
    return EvaluationRecord(
        ctx.variant.id, method, tuple(ids), float(sum(d)), float(max(d) - min(d)),
        base_path, corr_path, base_calib, corr_calib, path_imp, calib_imp, flag,
    )


def _regression(ctx: VariantContext, ids, chosen, base_calib):
    model = fit_from_samples(ctx.H, chosen, ctx.origin)
    mapped = np.array([r[2] for r in calib_errors(ctx.H, chosen, ctx.origin)])
    truths = np.array([s.truth for s in chosen], dtype=float)
    corr_calib = _mean_error(apply_correction_many(mapped, model, ctx.origin), truths)
    corrected = apply_correction_many(map_points(ctx.H, ctx.pixels), model, ctx.origin)
    corr_path = _mean_error(corrected, ctx.truth)
    return _record(ctx, "regression", ids, chosen, base_calib, corr_calib, corr_path)


def _gd(ctx: VariantContext, ids, chosen, base_calib, triplet_index):
    cfg = replace(ctx.cfg.gd, seed=_gd_seed(ctx.cfg.gd.seed, ctx.variant.id, triplet_index))
    v, _ = optimize(quad_vector(ctx.variant.src), ctx.variant.dst, chosen, ctx.origin, cfg)
    H_opt = optimized_homography(v, ctx.variant.dst)
    corr_calib = float(np.mean([r[1] for r in calib_errors(H_opt, chosen, ctx.origin)]))
    return _record(ctx, "gd", ids, chosen, base_calib, corr_calib, ctx.score(H_opt))


def evaluate_variant(variant: TrapezoidVariant, scene: Scene, method: str, calib_triplet, cfg: EvalConfig,
                     triplet_index: int = 0, ctx: VariantContext = None) -> EvaluationRecord:
    """Score one method on one (variant, calibration triplet)."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    ctx = ctx or VariantContext(variant, scene, cfg)
    chosen = [ctx.samples[i] for i in calib_triplet]
    if ctx.flag:
        return _record(ctx, method, calib_triplet, chosen, math.nan, math.nan, math.nan, ctx.flag)
    base_calib = float(np.mean([r[1] for r in calib_errors(ctx.H, chosen, ctx.origin)]))
    if method == "regression":
        return _regression(ctx, calib_triplet, chosen, base_calib)
    return _gd(ctx, calib_triplet, chosen, base_calib, triplet_index)


def hybrid_select(reg_record: EvaluationRecord, gd_record: EvaluationRecord, threshold: float = 75.0) -> str:
    if reg_record.valid and reg_record.calib_improvement >= threshold:
        return "regression"
    return "gd"


def hybrid_records(records, threshold: float = 75.0) -> list:
    """One ``method='hybrid'`` record per (variant, triplet) that has both a
    regression and a GD record, copied from whichever :func:`hybrid_select`
    picks."""
    reg = {(r.variant_id, r.calib_ids): r for r in records if r.method == "regression"}
    gd = {(r.variant_id, r.calib_ids): r for r in records if r.method == "gd"}
    out = []
    for key in sorted(reg.keys() & gd.keys()):
        chosen = reg[key] if hybrid_select(reg[key], gd[key], threshold) == "regression" else gd[key]
        out.append(replace(chosen, method="hybrid"))
    return out


def _variant_task(args):
    variant, scene, cfg = args
    ctx = VariantContext(variant, scene, cfg)
    out = []
    for method in cfg.methods:
        for t_idx, ids in enumerate(triplets(cfg.n_candidates, cfg.max_triplets)):
            out.append(evaluate_variant(variant, scene, method, ids, cfg, t_idx, ctx))
    return out


def run_evaluation(scene: Scene, variants, cfg: EvalConfig = EvalConfig(), jobs: int = 1) -> list:
    """All records for all variants, ordered by (variant, method, triplet)."""
    tasks = [(v, scene, cfg) for v in sorted(variants, key=lambda v: v.id)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_variant_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        chunks = [_variant_task(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_csv(records))


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_records_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        if tuple(reader.fieldnames) != CSV_HEADER:
            raise ConfigError(f"unexpected record header {reader.fieldnames}")
        return [EvaluationRecord.from_csv_row(row) for row in reader]
