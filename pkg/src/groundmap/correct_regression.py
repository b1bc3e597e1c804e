"""Quadratic error-model correction from three calibration samples.

The error magnitude is modelled as ``e(d) = a d**2 + b d`` of the mapped range
``d`` and removed by moving each mapped point radially about the camera foot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AtOrigin
from .geometry import GroundPoint, Homography, map_point

DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class ErrorModel:
    """Fitted error magnitude plus the direction it is applied in.

    ``direction_sign`` = +1 applies ``p - d_hat * c`` literally, with
    ``d_hat`` the unit vector from ``p`` toward the origin, which pushes
    points away from the camera. -1 pulls points toward the camera, which is
    what an overshooting (too far) mapping needs.
    """

    a: float
    b: float
    mode: str = "quadratic"
    direction_sign: int = 1

    def magnitude(self, d):
        return self.a * d * d + self.b * d

    def to_json(self) -> dict:
        return {"a": self.a, "b": self.b, "mode": self.mode, "direction_sign": self.direction_sign}

    @classmethod
    def from_json(cls, d: dict) -> "ErrorModel":
        return cls(float(d["a"]), float(d["b"]), d.get("mode", "quadratic"), int(d.get("direction_sign", 1)))


def calib_errors(H: Homography, samples, origin=(0.0, 0.0), scale: float = 1.0) -> list:
    """``(d_i, e_i, p_i)`` per sample: mapped range, Euclidean error, mapped point."""
    ox, oy = origin
    out = []
    for s in samples:
        x, y = map_point(H, s.pixel)
        p = GroundPoint(x * scale, y * scale)
        gx, gy = s.truth
        out.append((math.hypot(p.x - ox, p.y - oy), math.hypot(p.x - gx, p.y - gy), p))
    return out


def solve_unclamped(pairs) -> tuple:
    """Closed-form normal-equation solution ``(a, b, det)`` for e = a d² + b d."""
    d = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    S2, S3, S4 = (d**2).sum(), (d**3).sum(), (d**4).sum()
    T1, T2 = (d * e).sum(), (d**2 * e).sum()
    det = S4 * S2 - S3 * S3
    if abs(det) < DEGENERACY_RTOL * S4 * S2:
        return None, None, det
    a = (T2 * S2 - T1 * S3) / det
    b = (S4 * T1 - S3 * T2) / det
    return float(a), float(b), float(det)


def fit_error_model(pairs, direction_sign: int = 1) -> ErrorModel:
    """Least-squares fit of ``e(d) = a d² + b d`` to ``(d, e)`` pairs.

    Negative coefficients are clamped to zero (no refit). When the
    distances are (nearly) identical the quadratic term is unidentifiable and
    a linear model ``e = b d`` is fitted instead.
    """
    if any(p[0] <= 0 for p in pairs):
        raise ValueError("calibration distances must be positive")
    a, b, _ = solve_unclamped(pairs)
    if a is None:
        d = np.array([p[0] for p in pairs], dtype=float)
        e = np.array([p[1] for p in pairs], dtype=float)
        b = float((d * e).sum() / (d**2).sum())
        return ErrorModel(0.0, max(b, 0.0), "linear_fallback", direction_sign)
    return ErrorModel(max(a, 0.0), max(b, 0.0), "quadratic", direction_sign)


def overshoot_sign(mapped, truths, origin=(0.0, 0.0)) -> int:
    """-1 if most calibration points map farther from the camera than their
    true position (so the correction must pull inward), else +1."""
    ox, oy = origin
    votes = 0
    for p, g in zip(mapped, truths):
        rp = math.hypot(p[0] - ox, p[1] - oy)
        rg = math.hypot(g[0] - ox, g[1] - oy)
        votes += 1 if rp > rg else -1 if rp < rg else 0
    return -1 if votes > 0 else 1


def fit_from_samples(H: Homography, samples, origin=(0.0, 0.0), scale: float = 1.0) -> ErrorModel:
    rows = calib_errors(H, samples, origin, scale)
    sign = overshoot_sign([r[2] for r in rows], [s.truth for s in samples], origin)
    return fit_error_model([(d, e) for d, e, _ in rows], direction_sign=sign)


def apply_correction(p, model: ErrorModel, origin=(0.0, 0.0)) -> GroundPoint:
    ox, oy = origin
    dx, dy = ox - p[0], oy - p[1]
    d = math.hypot(dx, dy)
    if d < 1e-9:
        raise AtOrigin("point coincides with the camera origin")
    c = model.direction_sign * model.magnitude(d)
    return GroundPoint(p[0] - dx / d * c, p[1] - dy / d * c)


def apply_correction_many(pts, model: ErrorModel, origin=(0.0, 0.0)) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    delta = np.asarray(origin, dtype=float) - pts
    d = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(d < 1e-9):
        raise AtOrigin("a point coincides with the camera origin")
    c = model.direction_sign * model.magnitude(d)
    return pts - delta / d[:, None] * c[:, None]


def correct_points(H: Homography, samples, pts, origin=(0.0, 0.0)) -> tuple:
    """Fit on ``samples`` then correct ground points ``pts``; returns
    ``(model, corrected)``. Only the samples inform the fit."""
    model = fit_from_samples(H, samples, origin)
    return model, apply_correction_many(pts, model, origin)

