"""Per-column depth decomposition of a homography and the range error law.

For a fixed image column ``u`` the forward coordinate is a 1-D projective
function of the row, ``Y(v) = (A v + B) / (C v + D)``, which splits into a
constant plus a hyperbola around the horizon row::

    Y(v) = offset + K / (v - v_h)

Shifting the horizon by ``eps`` pixels produces a distance error that, to
first order, grows with the square of range: ``dY ~ (eps / K) * Y**2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AffineColumn, AtHorizon
from .geometry import Homography

AFFINE_TOL = 1e-12
DENOM_TOL = 1e-12


@dataclass(frozen=True)
class ColumnDepthModel:
    u: float
    A: float
    B: float
    C: float
    D: float
    v_h: Optional[float] = None
    K: Optional[float] = None
    offset: Optional[float] = None

    @property
    def is_affine(self) -> bool:
        return self.v_h is None

    def depth(self, v: float) -> float:
        """Forward distance at row ``v`` from the offset + hyperbola form."""
        if self.is_affine:
            return (self.A * v + self.B) / self.D
        q = v - self.v_h
        if abs(q) < DENOM_TOL:
            raise AtHorizon(f"row {v} is on the horizon")
        return self.offset + self.K / q

    def hyperbolic_range(self, v: float) -> float:
        """``K / (v - v_h)``: the range with the constant offset removed."""
        _require_finite_horizon(self)
        return self.K / (v - self.v_h)


def _require_finite_horizon(model: ColumnDepthModel) -> None:
    if model.is_affine:
        raise AffineColumn(f"column u={model.u} has no finite horizon")


def column_model(H: Homography, u: float) -> ColumnDepthModel:
    h = H.h
    A = float(h[1, 1])
    B = float(h[1, 0] * u + h[1, 2])
    C = float(h[2, 1])
    D = float(h[2, 0] * u + h[2, 2])
    if abs(C) <= AFFINE_TOL:
        return ColumnDepthModel(u, A, B, C, D)
    v_h = -D / C
    return ColumnDepthModel(u, A, B, C, D, v_h=v_h, K=(A * v_h + B) / C, offset=A / C)


def horizon_row(H: Homography, u: float) -> Optional[float]:
    C = H.h[2, 1]
    if abs(C) <= AFFINE_TOL:
        return None
    return float(-(H.h[2, 0] * u + H.h[2, 2]) / C)


def measure_epsilon(H_true: Homography, H_perturbed: Homography, u: float) -> float:
    """Horizon shift (px) of ``H_perturbed`` relative to ``H_true`` at column u."""
    a, b = horizon_row(H_true, u), horizon_row(H_perturbed, u)
    if a is None or b is None:
        raise AffineColumn(f"column u={u} has no finite horizon")
    return b - a


def exact_error(model: ColumnDepthModel, v: float, eps: float) -> float:
    """Distance error when the horizon moves from ``v_h`` to ``v_h + eps``."""
    _require_finite_horizon(model)
    q = v - model.v_h
    if abs(q) < DENOM_TOL or abs(q - eps) < DENOM_TOL:
        raise AtHorizon(f"row {v} coincides with the true or shifted horizon")
    return model.K * (1.0 / (q - eps) - 1.0 / q)


def approx_error(model: ColumnDepthModel, Y: float, eps: float) -> float:
    """First-order error ``(eps / K) * Y**2``.

    ``Y`` is the range in the hyperbolic term, i.e. ``K / (v - v_h)``; for a
    column with nonzero offset pass ``true_distance - model.offset``.
    """
    _require_finite_horizon(model)
    if model.K == 0.0:
        raise AffineColumn("scale factor K is zero")
    return eps / model.K * Y * Y


def loglog_slope(x, y) -> float:
    """Least-squares slope of log|y| against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float)))
    return float(np.polyfit(lx, ly, 1)[0])


def error_growth(H: Homography, u: float, rows, eps: float) -> list:
    """Rows of ``(u, v, Y, exact, approx)`` for a horizon shift ``eps``.

    ``Y`` is the true forward distance at row ``v``; the approximation is
    evaluated on the offset-free range ``Y - offset``.
    """
    model = column_model(H, u)
    _require_finite_horizon(model)
    out = []
    for v in rows:
        Y = model.depth(v)
        out.append((u, v, Y, exact_error(model, v, eps), approx_error(model, Y - model.offset, eps)))
    return out
