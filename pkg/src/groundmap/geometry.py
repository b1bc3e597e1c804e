"""Planar point/quad types and exact four-point homographies.

Image coordinates are (u, v) with v growing downward. Quad vertices follow
the order top-left, top-right, bottom-right, bottom-left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AtHorizon, DegenerateQuad, SingularSystem

COLLINEAR_TOL = 1e-9
PIVOT_TOL = 1e-12
HORIZON_TOL = 1e-12

TOP_LEFT, TOP_RIGHT, BOTTOM_RIGHT, BOTTOM_LEFT = range(4)


class PixelPoint(NamedTuple):
    u: float
    v: float


class GroundPoint(NamedTuple):
    x: float
    y: float


def _normalizing_transform(pts: np.ndarray) -> np.ndarray:
    # Hartley-style: centroid to origin, mean distance sqrt(2).
    c = pts.mean(axis=0)
    dist = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if not dist > 0:
        raise DegenerateQuad("all quad vertices coincide")
    s = math.sqrt(2.0) / dist
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _apply(T: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts @ T[:2, :2].T + T[:2, 2]


@dataclass(frozen=True)
class Quad:
    """Four ordered vertices, either on the image (``kind='pixel'``) or the
    ground/map (``kind='ground'``)."""

    vertices: tuple[tuple[float, float], ...]
    kind: str = "pixel"

    def __post_init__(self):
        verts = tuple((float(p[0]), float(p[1])) for p in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if self.kind not in ("pixel", "ground"):
            raise ValueError(f"unknown quad kind {self.kind!r}")
        if len(verts) != 4:
            raise ValueError(f"quad needs exactly 4 vertices, got {len(verts)}")
        if not all(math.isfinite(c) for p in verts for c in p):
            raise ValueError("quad vertices must be finite")
        check_non_degenerate(np.asarray(verts))

    @classmethod
    def from_array(cls, arr, kind: str = "pixel") -> "Quad":
        return cls(tuple(map(tuple, np.asarray(arr, dtype=float).reshape(4, 2))), kind)

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    def points(self) -> list:
        cls = PixelPoint if self.kind == "pixel" else GroundPoint
        return [cls(*p) for p in self.vertices]

    def to_json(self) -> list:
        return [list(p) for p in self.vertices]

    @classmethod
    def from_json(cls, data, kind: str = "pixel") -> "Quad":
        return cls(tuple(tuple(p) for p in data), kind)


def check_non_degenerate(pts: np.ndarray) -> None:
    """Raise DegenerateQuad if any three of the four vertices are collinear."""
    T = _normalizing_transform(pts)
    n = _apply(T, pts)
    for i, j, k in combinations(range(4), 3):
        area = (n[j, 0] - n[i, 0]) * (n[k, 1] - n[i, 1]) - (n[j, 1] - n[i, 1]) * (n[k, 0] - n[i, 0])
        if abs(area) < COLLINEAR_TOL:
            raise DegenerateQuad(f"vertices {i}, {j}, {k} are collinear")


def is_non_degenerate(pts) -> bool:
    try:
        check_non_degenerate(np.asarray(pts, dtype=float).reshape(4, 2))
    except DegenerateQuad:
        return False
    return True


def _gauge(m: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(m)
    if not norm > 0 or not np.isfinite(norm):
        raise SingularSystem("homography matrix has zero or non-finite norm")
    m = m / norm
    ref = m[2, 2]
    if abs(ref) < PIVOT_TOL:
        flat = m.ravel()
        ref = flat[np.flatnonzero(np.abs(flat) > PIVOT_TOL)[0]]
    return -m if ref < 0 else m


@dataclass(frozen=True, eq=False)
class Homography:
    """Projective map from image pixels to the ground plane.

    Always stored in the canonical gauge: unit Frobenius norm and
    ``h33 >= 0`` (or first nonzero entry positive when ``h33`` vanishes).
    """

    h: np.ndarray

    def __post_init__(self):
        m = np.array(self.h, dtype=float).reshape(3, 3)
        m = _gauge(m)
        if abs(np.linalg.det(m)) <= PIVOT_TOL:
            raise SingularSystem("homography is not invertible")
        m.setflags(write=False)
        object.__setattr__(self, "h", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.h, other.h)

    def __hash__(self):
        return hash(self.h.tobytes())

    def to_json(self) -> list:
        return [float(x) for x in self.h.ravel()]

    @classmethod
    def from_json(cls, data) -> "Homography":
        return cls(np.asarray(data, dtype=float).reshape(3, 3))


def _solve_gauss(A: list, b: list) -> list:
    """Solve an n×n system by Gaussian elimination with partial pivoting."""
    n = len(b)
    M = [list(map(float, row)) + [float(rhs)] for row, rhs in zip(A, b)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if abs(M[piv][col]) < PIVOT_TOL:
            raise SingularSystem(f"pivot {col} below {PIVOT_TOL}")
        M[col], M[piv] = M[piv], M[col]
        prow = M[col]
        inv = 1.0 / prow[col]
        for r in range(col + 1, n):
            row = M[r]
            f = row[col] * inv
            if f != 0.0:
                for c in range(col, n + 1):
                    row[c] -= f * prow[c]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n] - sum(M[r][c] * x[c] for c in range(r + 1, n))
        x[r] = s / M[r][r]
    return x


def compute_homography(src: Quad, dst: Quad) -> Homography:
    """Exact homography taking ``src`` vertex i onto ``dst`` vertex i.

    Both quads are Hartley-normalized before the 8×8 solve (with ``h33``
    fixed to 1 in normalized coordinates) and the result is de-normalized.
    """
    s = src.as_array() if isinstance(src, Quad) else np.asarray(src, dtype=float).reshape(4, 2)
    d = dst.as_array() if isinstance(dst, Quad) else np.asarray(dst, dtype=float).reshape(4, 2)
    check_non_degenerate(s)
    check_non_degenerate(d)
    Ts, Td = _normalizing_transform(s), _normalizing_transform(d)
    sn, dn = _apply(Ts, s), _apply(Td, d)
    A, b = [], []
    for (u, v), (x, y) in zip(sn, dn):
        A.append([u, v, 1.0, 0.0, 0.0, 0.0, -u * x, -v * x])
        b.append(x)
        A.append([0.0, 0.0, 0.0, u, v, 1.0, -u * y, -v * y])
        b.append(y)
    h = _solve_gauss(A, b)
    Hn = np.array(h + [1.0]).reshape(3, 3)
    return Homography(np.linalg.inv(Td) @ Hn @ Ts)


def map_point(H: Homography, p) -> GroundPoint:
    u, v = float(p[0]), float(p[1])
    m = H.h.tolist()
    w = m[2][0] * u + m[2][1] * v + m[2][2]
    if abs(w) <= HORIZON_TOL:
        raise AtHorizon(f"point ({u}, {v}) maps to infinity")
    return GroundPoint(
        (m[0][0] * u + m[0][1] * v + m[0][2]) / w,
        (m[1][0] * u + m[1][1] * v + m[1][2]) / w,
    )


def map_points(H: Homography, pts) -> np.ndarray:
    """Vectorized :func:`map_point` over an (N, 2) array."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    hom = pts @ H.h[:, :2].T + H.h[:, 2]
    w = hom[:, 2]
    if np.any(np.abs(w) <= HORIZON_TOL):
        raise AtHorizon("at least one point maps to infinity")
    return hom[:, :2] / w[:, None]


def denominators(H: Homography, pts) -> np.ndarray:
    """Homogeneous scale ``h31 u + h32 v + h33`` per point; its sign tells
    which side of the horizon a pixel lies on."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return pts @ H.h[2, :2] + H.h[2, 2]


def invert(H: Homography) -> Homography:
    m = H.h
    det = np.linalg.det(m)
    if abs(det) <= PIVOT_TOL:
        raise SingularSystem("homography is not invertible")
    adj = np.array(
        [
            [m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1], m[0, 2] * m[2, 1] - m[0, 1] * m[2, 2], m[0, 1] * m[1, 2] - m[0, 2] * m[1, 1]],
            [m[1, 2] * m[2, 0] - m[1, 0] * m[2, 2], m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0], m[0, 2] * m[1, 0] - m[0, 0] * m[1, 2]],
            [m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0], m[0, 1] * m[2, 0] - m[0, 0] * m[2, 1], m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]],
        ]
    )
    return Homography(adj / det)


# --- closed-form fast path -------------------------------------------------
# The coordinate-descent objective rebuilds a homography for every candidate.
# These plain-float helpers build the same unique four-point map through the
# unit square (Heckbert's construction), roughly 20x faster than the 8x8 solve.


def square_to_quad(q: Sequence[float]) -> tuple:
    """Row-major 3×3 map from the unit square (0,0),(1,0),(1,1),(0,1) onto
    the quad given as 8 flat coordinates."""
    x0, y0, x1, y1, x2, y2, x3, y3 = q
    sx = x0 - x1 + x2 - x3
    sy = y0 - y1 + y2 - y3
    if sx == 0.0 and sy == 0.0:
        return (x1 - x0, x2 - x1, x0, y1 - y0, y2 - y1, y0, 0.0, 0.0, 1.0)
    dx1, dx2 = x1 - x2, x3 - x2
    dy1, dy2 = y1 - y2, y3 - y2
    den = dx1 * dy2 - dx2 * dy1
    if den == 0.0:
        raise SingularSystem("quad is degenerate")
    g = (sx * dy2 - dx2 * sy) / den
    h = (dx1 * sy - sx * dy1) / den
    return (
        x1 - x0 + g * x1, x3 - x0 + h * x3, x0,
        y1 - y0 + g * y1, y3 - y0 + h * y3, y0,
        g, h, 1.0,
    )


def adjugate3(m: Sequence[float]) -> tuple:
    a, b, c, d, e, f, g, h, i = m
    return (
        e * i - f * h, c * h - b * i, b * f - c * e,
        f * g - d * i, a * i - c * g, c * d - a * f,
        d * h - e * g, b * g - a * h, a * e - b * d,
    )


def matmul3(p: Sequence[float], q: Sequence[float]) -> tuple:
    return tuple(
        p[3 * r] * q[c] + p[3 * r + 1] * q[3 + c] + p[3 * r + 2] * q[6 + c]
        for r in range(3)
        for c in range(3)
    )


def fast_homography(src8: Sequence[float], dst_from_square: Sequence[float]) -> tuple:
    """Unnormalized src→dst homography as 9 floats, given the precomputed
    ``square_to_quad(dst)``. Projectively equal to :func:`compute_homography`."""
    return matmul3(dst_from_square, adjugate3(square_to_quad(src8)))

