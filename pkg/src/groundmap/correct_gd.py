"""Derivative-free refinement of the image-side trapezoid.

The eight image coordinates of the trapezoid are adjusted to minimise the
mean Euclidean error on the calibration samples. A coarse grid over two
opposing corners is followed by randomized coordinate descent with a
shrinking step. Only strictly improving moves are accepted, so the
calibration error never increases.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import Homography, Quad, compute_homography, fast_homography, square_to_quad

INFEASIBLE = math.inf
BOX_TOL = 1e-9
DIAGONALS = {"tl-br": (0, 2), "tr-bl": (1, 3)}


@dataclass(frozen=True)
class GdConfig:
    delta_max: float = 10.0
    coarse_grid: tuple = (-4.0, -2.0, 0.0, 2.0, 4.0)
    fine_steps: tuple = (2.0, 1.0, 0.5, 0.25)
    budget: int = 20000
    patience: int = 2
    seed: int = 0
    diagonal: str = "tl-br"

    def __post_init__(self):
        object.__setattr__(self, "coarse_grid", tuple(float(g) for g in self.coarse_grid))
        object.__setattr__(self, "fine_steps", tuple(float(s) for s in self.fine_steps))
        steps = self.fine_steps
        if not steps or any(s <= 0 for s in steps) or any(a <= b for a, b in zip(steps, steps[1:])):
            raise ConfigError(f"fine_steps must be positive and strictly decreasing, got {steps}")
        if self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.delta_max <= 0:
            raise ConfigError("delta_max must be positive")
        if self.diagonal not in DIAGONALS:
            raise ConfigError(f"diagonal must be one of {sorted(DIAGONALS)}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["coarse_grid"] = list(self.coarse_grid)
        d["fine_steps"] = list(self.fine_steps)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GdConfig":
        return cls(**d)


@dataclass
class Trace:
    evaluations: int = 0
    initial: float = math.nan
    final: float = math.nan
    moves: list = field(default_factory=list)

    def record(self, phase, coordinate, delta, objective):
        self.moves.append(
            {"iteration": self.evaluations, "phase": phase, "coordinate": coordinate,
             "delta": delta, "objective": objective}
        )

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m) + "\n" for m in self.moves)


class GdContext:
    """Fixed data of one optimisation run: map quad, calibration samples,
    camera origin and the starting vertices defining the feasible box."""

    def __init__(self, dst: Quad, samples, origin=(0.0, 0.0), v0=None, delta_max: float = 10.0):
        self.dst = dst
        self.dst_sq = square_to_quad([c for p in dst.vertices for c in p])
        self.pixels = [(float(s.pixel[0]), float(s.pixel[1])) for s in samples]
        self.truths = [(float(s.truth[0]), float(s.truth[1])) for s in samples]
        self.origin = (float(origin[0]), float(origin[1]))
        self.v0 = None if v0 is None else [float(c) for c in v0]
        self.delta_max = float(delta_max)


def quad_vector(q: Quad) -> list:
    return [c for p in q.vertices for c in p]


def vector_quad(v) -> Quad:
    return Quad.from_array(np.asarray(v, dtype=float).reshape(4, 2), "pixel")


def _degenerate(v) -> bool:
    # same normalized signed-area test as geometry.check_non_degenerate
    xs, ys = v[0::2], v[1::2]
    cx, cy = sum(xs) / 4.0, sum(ys) / 4.0
    dist = sum(math.hypot(x - cx, y - cy) for x, y in zip(xs, ys)) / 4.0
    if dist <= 0.0:
        return True
    s2 = 2.0 / (dist * dist)
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        area = (xs[j] - xs[i]) * (ys[k] - ys[i]) - (ys[j] - ys[i]) * (xs[k] - xs[i])
        if abs(area * s2) < 1e-9:
            return True
    return False


def objective(v, ctx: GdContext) -> float:
    """Mean Euclidean calibration error under the homography induced by the
    image vertices ``v``; ``inf`` when ``v`` is infeasible."""
    if ctx.v0 is not None:
        lim = ctx.delta_max + BOX_TOL
        if any(abs(a - b) > lim for a, b in zip(v, ctx.v0)):
            return INFEASIBLE
    if _degenerate(v):
        return INFEASIBLE
    try:
        h = fast_homography(v, ctx.dst_sq)
    except (ZeroDivisionError, ArithmeticError):
        return INFEASIBLE
    h11, h12, h13, h21, h22, h23, h31, h32, h33 = h
    # calibration pixels must stay on the quad's side of the horizon
    cu, cv = sum(v[0::2]) / 4.0, sum(v[1::2]) / 4.0
    w_ref = h31 * cu + h32 * cv + h33
    total = 0.0
    for (u, r), (gx, gy) in zip(ctx.pixels, ctx.truths):
        w = h31 * u + h32 * r + h33
        if abs(w) <= 1e-300 or (w > 0) != (w_ref > 0):
            return INFEASIBLE
        x = (h11 * u + h12 * r + h13) / w
        y = (h21 * u + h22 * r + h23) / w
        total += math.hypot(x - gx, y - gy)
    return total / len(ctx.pixels)


class _Run:
    """Shared bookkeeping for the two phases: budget and accepted moves."""

    def __init__(self, ctx: GdContext, cfg: GdConfig, trace: Trace):
        self.ctx, self.cfg, self.trace = ctx, cfg, trace

    @property
    def exhausted(self) -> bool:
        return self.trace.evaluations >= self.cfg.budget

    def evaluate(self, v) -> float:
        self.trace.evaluations += 1
        return objective(v, self.ctx)


def _coarse(v, f, run: _Run):
    grid = run.cfg.coarse_grid
    for vertex in DIAGONALS[run.cfg.diagonal]:
        start = list(v)
        for dx in grid:
            for dy in grid:
                if dx == 0.0 and dy == 0.0:
                    continue
                if run.exhausted:
                    return v, f
                cand = list(start)
                cand[2 * vertex] += dx
                cand[2 * vertex + 1] += dy
                fc = run.evaluate(cand)
                if fc < f:
                    v, f = cand, fc
                    run.trace.record("coarse", [2 * vertex, 2 * vertex + 1], [dx, dy], fc)
    return v, f


def _fine(v, f, run: _Run, rng: np.random.Generator):
    for step in run.cfg.fine_steps:
        idle = 0
        while idle < run.cfg.patience:
            improved = False
            for coord in rng.permutation(8).tolist():
                for delta in (step, -step):
                    if run.exhausted:
                        return v, f
                    cand = list(v)
                    cand[coord] += delta
                    fc = run.evaluate(cand)
                    if fc < f:
                        v, f = cand, fc
                        improved = True
                        run.trace.record("fine", coord, delta, fc)
                        break
            idle = 0 if improved else idle + 1
    return v, f


def _start(v0, ctx: GdContext, cfg: GdConfig, trace: Trace = None):
    trace = Trace() if trace is None else trace
    run = _Run(ctx, cfg, trace)
    v = [float(c) for c in v0]
    if run.exhausted:
        return run, v, math.nan
    f = run.evaluate(v)
    trace.initial = f
    return run, v, f


def coarse_search(v0, cfg: GdConfig, ctx: GdContext, trace: Trace = None) -> list:
    """Phase 1: joint grid over each corner of the configured diagonal,
    one corner after the other. Never returns a worse vector."""
    run, v, f = _start(v0, ctx, cfg, trace)
    if not run.exhausted:
        v, f = _coarse(v, f, run)
    run.trace.final = f
    return v


def fine_descent(v0, cfg: GdConfig, ctx: GdContext, trace: Trace = None) -> list:
    """Phase 2: randomized-order coordinate descent with step schedule."""
    run, v, f = _start(v0, ctx, cfg, trace)
    if not run.exhausted:
        v, f = _fine(v, f, run, np.random.default_rng(cfg.seed))
    run.trace.final = f
    return v


def optimize(v0, dst: Quad, samples, origin=(0.0, 0.0), cfg: GdConfig = GdConfig()) -> tuple:
    """Coarse search then fine descent from ``v0`` (8 image coordinates).

    Returns ``(v, trace)``; ``trace.final <= trace.initial`` always.
    """
    v0 = [float(c) for c in v0]
    ctx = GdContext(dst, samples, origin, v0, cfg.delta_max)
    run, v, f = _start(v0, ctx, cfg)
    if not run.exhausted:
        v, f = _coarse(v, f, run)
        v, f = _fine(v, f, run, np.random.default_rng(cfg.seed))
    run.trace.final = f
    return v, run.trace


def optimized_homography(v, dst: Quad) -> Homography:
    return compute_homography(vector_quad(v), dst)
