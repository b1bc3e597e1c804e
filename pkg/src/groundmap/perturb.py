"""Random trapezoid variants mimicking operator click errors.

A variant shifts k randomly chosen coordinates of the image quad (and,
with ``sides='both'``, the map quad) by a random signed pixel magnitude.
Map-side shifts are in display pixels of the site map and are converted to
metres with ``map_scale``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError, DegenerateAfterRetries, GroundmapError
from .geometry import Quad, compute_homography

MAX_RETRIES = 100


@dataclass(frozen=True)
class PerturbationSpec:
    magnitudes: tuple = (0, 1, 2, 3)
    coord_count_range: tuple = (2, 16)
    sides: str = "both"
    n_variants: int = 1000
    map_scale: float = 0.1  # metres per map display pixel

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", tuple(self.magnitudes))
        object.__setattr__(self, "coord_count_range", tuple(self.coord_count_range))
        if self.sides not in ("image-only", "both"):
            raise ConfigError(f"sides must be 'image-only' or 'both', got {self.sides!r}")
        if not self.magnitudes or any(m < 0 for m in self.magnitudes):
            raise ConfigError("magnitudes must be non-empty and non-negative")
        lo, hi = self.coord_count_range
        if not 1 <= lo <= hi <= self.total_coords:
            raise ConfigError(
                f"coord_count_range {self.coord_count_range} invalid for {self.total_coords} coordinates"
            )
        if self.n_variants < 0:
            raise ConfigError("n_variants must be non-negative")
        if not self.map_scale > 0:
            raise ConfigError("map_scale must be positive")

    @property
    def total_coords(self) -> int:
        return 16 if self.sides == "both" else 8

    def to_json(self) -> dict:
        d = asdict(self)
        d["magnitudes"] = list(self.magnitudes)
        d["coord_count_range"] = list(self.coord_count_range)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PerturbationSpec":
        return cls(**d)


@dataclass(frozen=True)
class TrapezoidVariant:
    """A perturbed quad pair. ``applied`` lists ``(quad, vertex, axis, shift)``
    with quad in {'src', 'dst'}, axis 0 = x/u and 1 = y/v, shift in pixels."""

    id: int
    src: Quad
    dst: Quad
    applied: tuple = ()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "src": self.src.to_json(),
            "dst": self.dst.to_json(),
            "applied": [list(a) for a in self.applied],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrapezoidVariant":
        return cls(
            int(d["id"]),
            Quad.from_json(d["src"], "pixel"),
            Quad.from_json(d["dst"], "ground"),
            tuple((a[0], int(a[1]), int(a[2]), float(a[3])) for a in d["applied"]),
        )


def variant_rng(seed: int, variant_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(variant_id)])


def _draw(base_src: np.ndarray, base_dst: np.ndarray, spec: PerturbationSpec, rng):
    lo, hi = spec.coord_count_range
    k = int(rng.integers(lo, hi + 1))
    coords = rng.choice(spec.total_coords, size=k, replace=False)
    mags = rng.choice(np.asarray(spec.magnitudes, dtype=float), size=k)
    signs = rng.choice([-1.0, 1.0], size=k)
    src, dst = base_src.copy(), base_dst.copy()
    applied = []
    for c, m, s in sorted(zip(coords.tolist(), mags.tolist(), signs.tolist())):
        shift = m * s
        side, rest = divmod(c, 8)
        vertex, axis = divmod(rest, 2)
        if side == 0:
            src[vertex, axis] += shift
            applied.append(("src", vertex, axis, shift))
        else:
            # map y axis points up while display rows grow down
            dst[vertex, axis] += shift * spec.map_scale * (1.0 if axis == 0 else -1.0)
            applied.append(("dst", vertex, axis, shift))
    return src, dst, tuple(applied)


def make_variant(base_src: Quad, base_dst: Quad, spec: PerturbationSpec, seed: int, variant_id: int) -> TrapezoidVariant:
    """Variant ``variant_id``; depends only on ``(seed, variant_id)``."""
    rng = variant_rng(seed, variant_id)
    s0, d0 = base_src.as_array(), base_dst.as_array()
    for _ in range(MAX_RETRIES):
        src, dst, applied = _draw(s0, d0, spec, rng)
        try:
            q_src, q_dst = Quad.from_array(src, "pixel"), Quad.from_array(dst, "ground")
            compute_homography(q_src, q_dst)
        except GroundmapError:
            continue
        return TrapezoidVariant(variant_id, q_src, q_dst, applied)
    raise DegenerateAfterRetries(f"variant {variant_id}: no valid draw in {MAX_RETRIES} tries")


def generate_variants(base_src: Quad, base_dst: Quad, spec: PerturbationSpec, seed: int) -> list:
    return [make_variant(base_src, base_dst, spec, seed, i) for i in range(spec.n_variants)]


def write_jsonl(variants: Iterable[TrapezoidVariant], path) -> None:
    with open(path, "w") as fh:
        for v in variants:
            fh.write(json.dumps(v.to_json()) + "\n")


def read_jsonl(path) -> Iterator[TrapezoidVariant]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield TrapezoidVariant.from_json(json.loads(line))
