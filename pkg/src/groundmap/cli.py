"""Command-line entry point.

Every stage reads and writes plain files so it can be run on its own::

    groundmap simulate  --scene scene1 --seed 42 --out-dir out
    groundmap perturb   --scene out/scene.json --n-variants 100 --seed 42 --out-dir out
    groundmap correct   --scene out/scene.json --variants out/variants.jsonl --method gd
    groundmap evaluate  --scene out/scene.json --variants out/variants.jsonl --method hybrid
    groundmap report    --records out/records.csv
    groundmap validate-theory --eps 0.5 1 2
    groundmap pipeline  --config run.json --seed 42

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
degeneracy. ``GROUNDMAP_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import aggregate as agg
from .correct_gd import GdConfig, optimize, optimized_homography, quad_vector
from .correct_regression import apply_correction_many, calib_errors, fit_from_samples
from .depth_model import column_model, error_growth, loglog_slope
from .errors import ConfigError, DataError, GroundmapError
from .evaluate import (
    IMPROVEMENT_FORMULA, EvalConfig, hybrid_records, read_records_csv, run_evaluation, write_records_csv,
)
from .geometry import compute_homography
from .perturb import PerturbationSpec, generate_variants, read_jsonl, write_jsonl
from .simulator import (
    SCENE_PRESETS, CameraModel, Scene, SceneSpec, calibration_points, generate_scene, ground_truth_homography,
    project,
)

OUT_ENV = "GROUNDMAP_OUT"
THEORY_HEADER = ("eps", "u", "v", "Y", "exact", "approx", "rel_gap")


def default_out_dir() -> str:
    return os.environ.get(OUT_ENV, "out")


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def _build(cls, d: dict, what: str):
    try:
        return cls.from_json(d) if hasattr(cls, "from_json") else cls(**d)
    except TypeError as exc:
        raise ConfigError(f"bad {what} config: {exc}") from exc


@dataclass
class RunConfig:
    """Everything a full pipeline run depends on, besides the output path."""

    scene: object = "scene1"  # preset name or SceneSpec JSON
    camera: dict = field(default_factory=dict)  # overrides applied on top of the scene's camera
    perturbation: dict = field(default_factory=lambda: {"n_variants": 100})
    methods: str = "hybrid"
    gd: dict = field(default_factory=dict)
    n_candidates: int = 10
    max_triplets: Optional[int] = None
    hybrid_threshold: float = 75.0
    seed: int = 0

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        return cls(**d)

    def scene_spec(self) -> SceneSpec:
        spec = resolve_scene(self.scene)
        if self.camera:
            cam = _build(CameraModel, {**spec.camera.__dict__, **self.camera}, "camera")
            spec = SceneSpec.from_json({**spec.to_json(), "camera": cam.__dict__})
        return spec

    def eval_config(self) -> EvalConfig:
        gd = _build(GdConfig, {**self.gd, "seed": self.seed}, "gd")
        return EvalConfig(methods=methods_for(self.methods), n_candidates=self.n_candidates,
                          hybrid_threshold=self.hybrid_threshold, gd=gd, max_triplets=self.max_triplets)


def resolve_scene(scene) -> SceneSpec:
    if isinstance(scene, dict):
        return _build(SceneSpec, scene, "scene")
    if scene in SCENE_PRESETS:
        return SCENE_PRESETS[scene]
    if Path(str(scene)).is_file():
        return _build(SceneSpec, load_json(scene), "scene")
    raise ConfigError(f"unknown scene {scene!r}; presets: {sorted(SCENE_PRESETS)}")


def methods_for(choice: str) -> tuple:
    return {"regression": ("regression",), "gd": ("gd",), "both": ("regression", "gd"),
            "hybrid": ("regression", "gd")}[choice]


def _out_dir(args) -> Path:
    out = Path(args.out_dir or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scene(path) -> Scene:
    return Scene.from_json(load_json(path))


def _load_variants(path, ids=None) -> list:
    variants = list(read_jsonl(path))
    if ids is not None:
        variants = [v for v in variants if v.id in ids]
    if not variants:
        raise DataError(f"no variants in {path}")
    return variants


def _gd_from_args(args) -> GdConfig:
    d = {}
    for key in ("delta_max", "coarse_grid", "fine_steps", "budget", "patience", "diagonal"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    d["seed"] = args.seed
    return GdConfig(**d)


# -- stages ------------------------------------------------------------------


def run_simulate(spec: SceneSpec, seed: int, out: Path) -> Scene:
    scene = generate_scene(spec, seed)
    dump_json(scene.to_json(), out / "scene.json")
    return scene


def run_perturb(scene: Scene, pspec: PerturbationSpec, seed: int, out: Path) -> list:
    variants = generate_variants(scene.src, scene.dst, pspec, seed)
    write_jsonl(variants, out / "variants.jsonl")
    return variants


def run_evaluate(scene: Scene, variants, cfg: EvalConfig, hybrid: bool, jobs: int, out: Path) -> list:
    records = run_evaluation(scene, variants, cfg, jobs=jobs)
    if hybrid:
        records = records + hybrid_records(records, cfg.hybrid_threshold)
    write_records_csv(records, out / "records.csv")
    return records


def run_report(records, out: Path, bins: int = 8) -> str:
    stats = agg.aggregate(records, IMPROVEMENT_FORMULA)
    dump_json(stats.to_json(), out / "aggregate.json")
    dump_json(agg.heatmaps_by_method(records, bins, bins), out / "heatmaps.json")
    text = agg.table(stats)
    (out / "table.txt").write_text(text)
    return text


def theory_rows(cam: CameraModel, eps_values, ys) -> tuple:
    """Exact vs first-order range error along the optical column; returns
    ``(rows, slopes, model)`` with one log-log slope per ``eps``."""
    H = ground_truth_homography(cam)
    u = cam.cx
    v_rows = [project(cam, (0.0, y)).v for y in ys]
    model = column_model(H, u)
    rows, slopes = [], {}
    for eps in eps_values:
        table = error_growth(H, u, v_rows, eps)
        for (_, v, Y, exact, approx) in table:
            rows.append((eps, u, v, Y, exact, approx, abs(approx - exact) / abs(exact)))
        slopes[eps] = loglog_slope([r[2] for r in table], [r[3] for r in table])
    return rows, slopes, model


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = resolve_scene(args.scene)
    overrides = {k: v for k, v in (("fov_h", args.fov), ("tilt_deg", args.tilt), ("height_m", args.height))
                 if v is not None}
    if overrides:
        cam = CameraModel(**{**spec.camera.__dict__, **overrides})
        spec = SceneSpec.from_json({**spec.to_json(), "camera": cam.__dict__})
    scene = run_simulate(spec, args.seed, _out_dir(args))
    print(f"scene {scene.id}: {len(scene.trajectory_points())} trajectory points")
    return 0


def cmd_perturb(args) -> int:
    scene = _load_scene(args.scene)
    d = load_json(args.spec) if args.spec else {}
    if args.n_variants is not None:
        d["n_variants"] = args.n_variants
    pspec = _build(PerturbationSpec, d, "perturbation")
    variants = run_perturb(scene, pspec, args.seed, _out_dir(args))
    print(f"{len(variants)} variants")
    return 0


def cmd_correct(args) -> int:
    scene = _load_scene(args.scene)
    variant = _load_variants(args.variants, {args.variant_id})[0]
    samples = calibration_points(scene, args.calib)
    origin = tuple(scene.camera.origin)
    out = _out_dir(args)
    if args.method == "regression":
        H = compute_homography(variant.src, variant.dst)
        model = fit_from_samples(H, samples, origin)
        rows = calib_errors(H, samples, origin)
        fixed = apply_correction_many([r[2] for r in rows], model, origin)
        truths = np.array([s.truth for s in samples])
        result = {
            "variant_id": variant.id, "calib_distances": list(args.calib), "model": model.to_json(),
            "baseline_calib_err": float(np.mean([r[1] for r in rows])),
            "corrected_calib_err": float(np.hypot(*(fixed - truths).T).mean()),
        }
        dump_json(result, out / "error_model.json")
    else:
        cfg = _gd_from_args(args)
        v, trace = optimize(quad_vector(variant.src), variant.dst, samples, origin, cfg)
        result = {
            "variant_id": variant.id, "calib_distances": list(args.calib), "config": cfg.to_json(),
            "vertices": v, "homography": optimized_homography(v, variant.dst).to_json(),
            "initial_objective": trace.initial, "final_objective": trace.final,
            "evaluations": trace.evaluations,
        }
        dump_json(result, out / "optimized.json")
        (out / "trace.jsonl").write_text(trace.to_jsonl())
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    scene = _load_scene(args.scene)
    variants = _load_variants(args.variants)
    cfg = EvalConfig(methods=methods_for(args.method), n_candidates=args.candidates,
                     hybrid_threshold=args.threshold, gd=_gd_from_args(args), max_triplets=args.max_triplets)
    out = _out_dir(args)
    dump_json({"method": args.method, "scene": str(args.scene), "variants": str(args.variants),
               "eval": cfg.to_json()}, out / "run_config.json")
    records = run_evaluate(scene, variants, cfg, args.method == "hybrid", args.jobs, out)
    print(f"{len(records)} records")
    return 0


def cmd_report(args) -> int:
    records = read_records_csv(args.records)
    text = run_report(records, _out_dir(args), args.bins)
    sys.stdout.write(text)
    return 0


def cmd_validate_theory(args) -> int:
    cam = CameraModel() if args.camera == "default" else _build(CameraModel, load_json(args.camera), "camera")
    ys = np.arange(args.y_min, args.y_max + 1e-9, args.y_step).tolist()
    rows, slopes, model = theory_rows(cam, args.eps, ys)
    out = _out_dir(args)
    with open(out / "theory.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(THEORY_HEADER)
        w.writerows([[repr(float(x)) for x in r] for r in rows])
    summary = {"K": model.K, "v_h": model.v_h, "offset": model.offset,
               "slopes": {repr(float(e)): s for e, s in slopes.items()}}
    dump_json(summary, out / "theory.json")
    for eps, s in slopes.items():
        print(f"eps={eps:g} px  slope={s:.4f}")
    return 0


def cmd_pipeline(args) -> int:
    out = _out_dir(args)
    if args.config:
        raw = Path(args.config).read_bytes()
        cfg = _build(RunConfig, load_json(args.config), "run")
    else:
        cfg = RunConfig()
        raw = (json.dumps(cfg.__dict__, indent=2, sort_keys=True) + "\n").encode()
    if args.seed is not None:
        cfg.seed = args.seed
    (out / "run_config.json").write_bytes(raw)
    scene = run_simulate(cfg.scene_spec(), cfg.seed, out)
    variants = run_perturb(scene, _build(PerturbationSpec, cfg.perturbation, "perturbation"), cfg.seed, out)
    records = run_evaluate(scene, variants, cfg.eval_config(), cfg.methods == "hybrid", args.jobs, out)
    sys.stdout.write(run_report(records, out))
    return 0


# -- parser ------------------------------------------------------------------


def _add_gd_flags(p) -> None:
    g = p.add_argument_group("gradient-free refinement")
    g.add_argument("--delta-max", type=float)
    g.add_argument("--coarse-grid", type=float, nargs="+")
    g.add_argument("--fine-steps", type=float, nargs="+")
    g.add_argument("--budget", type=int)
    g.add_argument("--patience", type=int)
    g.add_argument("--diagonal", choices=("tl-br", "tr-bl"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundmap", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or ./out)")
        return p

    p = add("simulate", cmd_simulate, "generate a synthetic scene")
    p.add_argument("--scene", default="scene1", help="preset name or SceneSpec JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fov", type=float)
    p.add_argument("--tilt", type=float)
    p.add_argument("--height", type=float)

    p = add("perturb", cmd_perturb, "draw trapezoid variants")
    p.add_argument("--scene", required=True)
    p.add_argument("--spec", help="PerturbationSpec JSON file")
    p.add_argument("--n-variants", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = add("correct", cmd_correct, "correct one variant from three calibration samples")
    p.add_argument("--scene", required=True)
    p.add_argument("--variants", required=True)
    p.add_argument("--variant-id", type=int, default=0)
    p.add_argument("--calib", type=float, nargs=3, default=[5.0, 25.0, 44.0], metavar="D")
    p.add_argument("--method", choices=("regression", "gd"), default="regression")
    p.add_argument("--seed", type=int, default=0)
    _add_gd_flags(p)

    p = add("evaluate", cmd_evaluate, "score methods over all variants and triplets")
    p.add_argument("--scene", required=True)
    p.add_argument("--variants", required=True)
    p.add_argument("--method", choices=("regression", "gd", "both", "hybrid"), default="both")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--candidates", type=int, default=10)
    p.add_argument("--max-triplets", type=int)
    p.add_argument("--threshold", type=float, default=75.0)
    _add_gd_flags(p)

    p = add("report", cmd_report, "aggregate statistics, heatmaps and summary table")
    p.add_argument("--records", required=True)
    p.add_argument("--bins", type=int, default=8)

    p = add("validate-theory", cmd_validate_theory, "exact vs quadratic range error sweep")
    p.add_argument("--eps", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--camera", default="default", help="'default' or CameraModel JSON file")
    p.add_argument("--y-min", type=float, default=10.0)
    p.add_argument("--y-max", type=float, default=50.0)
    p.add_argument("--y-step", type=float, default=1.0)

    p = add("pipeline", cmd_pipeline, "simulate, perturb, evaluate and report in one go")
    p.add_argument("--config", help="RunConfig JSON file, copied verbatim into the output")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GroundmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
