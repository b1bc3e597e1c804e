"""Ideal pinhole camera over a flat road, used as exact ground truth.

World frame: ground plane z = 0, camera at (0, 0, height_m) looking along +y
and pitched down by ``tilt_deg``; zero roll and yaw. Image v grows downward.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import AboveHorizon, BehindCamera, ConfigError, OutOfFrustum, OutOfRange
from .geometry import GroundPoint, Homography, PixelPoint, Quad, compute_homography

MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class CameraModel:
    fov_h: float = 95.0
    width: int = 1920
    height: int = 1080
    height_m: float = 4.0
    tilt_deg: float = 15.0

    def __post_init__(self):
        if not 0.0 < self.fov_h < 180.0:
            raise ConfigError(f"fov_h must be in (0, 180), got {self.fov_h}")
        if not self.height_m > 0.0:
            raise ConfigError(f"height_m must be positive, got {self.height_m}")
        if not 0.0 <= self.tilt_deg < 90.0:
            raise ConfigError(f"tilt_deg must be in [0, 90), got {self.tilt_deg}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("image size must be positive")

    @property
    def f(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_h) / 2.0)

    @property
    def cx(self) -> float:
        return self.width / 2.0

    @property
    def cy(self) -> float:
        return self.height / 2.0

    @property
    def horizon_v(self) -> float:
        return self.cy - self.f * math.tan(math.radians(self.tilt_deg))

    @property
    def origin(self) -> GroundPoint:
        """Foot of the optical centre on the ground plane."""
        return GroundPoint(0.0, 0.0)

    def in_image(self, p) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height


def _camera_coords(cam: CameraModel, x, y):
    t = math.radians(cam.tilt_deg)
    s, c = math.sin(t), math.cos(t)
    xc = x
    yc = -y * s + cam.height_m * c
    zc = y * c + cam.height_m * s
    return xc, yc, zc


def project(cam: CameraModel, g, strict: bool = False) -> PixelPoint:
    """Pinhole projection of ground point ``g``.

    Raises BehindCamera for non-positive optical depth. Points outside the
    image are returned as-is unless ``strict``, in which case OutOfFrustum
    is raised with the projection attached.
    """
    xc, yc, zc = _camera_coords(cam, float(g[0]), float(g[1]))
    if zc <= MIN_DEPTH:
        raise BehindCamera(f"ground point {tuple(g)} is behind the camera")
    p = PixelPoint(cam.cx + cam.f * xc / zc, cam.cy + cam.f * yc / zc)
    if strict and not cam.in_image(p):
        raise OutOfFrustum(f"ground point {tuple(g)} projects outside the image", pixel=p)
    return p


def project_many(cam: CameraModel, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    xc, yc, zc = _camera_coords(cam, pts[:, 0], pts[:, 1])
    if np.any(zc <= MIN_DEPTH):
        raise BehindCamera("at least one ground point is behind the camera")
    return np.column_stack([cam.cx + cam.f * xc / zc, cam.cy + cam.f * yc / zc])


def unproject_to_ground(cam: CameraModel, p) -> GroundPoint:
    """Ray-plane intersection of the viewing ray through pixel ``p``."""
    t = math.radians(cam.tilt_deg)
    s, c = math.sin(t), math.cos(t)
    a = (float(p[0]) - cam.cx) / cam.f
    b = (float(p[1]) - cam.cy) / cam.f
    # ray direction in world: a*x_cam + b*y_cam + z_cam
    down = s + b * c
    if down <= 1e-12:
        raise AboveHorizon(f"pixel {tuple(p)} is on or above the horizon")
    lam = cam.height_m / down
    return GroundPoint(lam * a, lam * (c - b * s))


def true_trapezoid(cam: CameraModel, near_y: float, far_y: float, half_width: float):
    """Image quad and ground rectangle of a road-aligned trapezoid.

    Returns ``(src, dst)`` in top-left, top-right, bottom-right, bottom-left
    order; the far edge is on top in the image.
    """
    if not 0.0 < near_y < far_y:
        raise OutOfRange(f"need 0 < near_y < far_y, got {near_y}, {far_y}")
    if not half_width > 0.0:
        raise OutOfRange("half_width must be positive")
    ground = [(-half_width, far_y), (half_width, far_y), (half_width, near_y), (-half_width, near_y)]
    pixels = [project(cam, g, strict=True) for g in ground]
    return Quad(tuple(pixels), "pixel"), Quad(tuple(ground), "ground")


def ground_truth_homography(cam: CameraModel, near_y=5.0, far_y=50.0, half_width=3.5) -> Homography:
    return compute_homography(*true_trapezoid(cam, near_y, far_y, half_width))


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a synthetic scene.

    The trajectory distance distribution is triangular over ``calib_range``
    with its mode at ``peak_fraction`` of the range. This is a stand-in for a
    measured traffic histogram.
    """

    id: str = "scene1"
    camera: CameraModel = field(default_factory=CameraModel)
    calib_range: tuple = (5.0, 44.0)
    trapezoid: tuple = (6.0, 40.0, 3.5)  # near_y, far_y, half_width
    residual_px: tuple = (0.0,) * 8  # manual-placement error of the image quad, (u, v) per vertex
    n_trajectories: int = 40
    points_per_trajectory: int = 25
    lateral_half_width: float = 3.5
    peak_fraction: float = 1.0 / 3.0
    noise_px: float = 0.0

    def __post_init__(self):
        lo, hi = self.calib_range
        if not 0.0 < lo < hi:
            raise ConfigError(f"invalid calib_range {self.calib_range}")
        if not 0.0 <= self.peak_fraction <= 1.0:
            raise ConfigError("peak_fraction must be in [0, 1]")
        if self.n_trajectories < 1 or self.points_per_trajectory < 1:
            raise ConfigError("need at least one trajectory point")
        object.__setattr__(self, "residual_px", tuple(float(r) for r in self.residual_px))
        if len(self.residual_px) != 8:
            raise ConfigError("residual_px needs 8 values")

    def to_json(self) -> dict:
        d = asdict(self)
        d["calib_range"] = list(self.calib_range)
        d["trapezoid"] = list(self.trapezoid)
        d["residual_px"] = list(self.residual_px)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        if "camera" in d:
            d["camera"] = CameraModel(**d["camera"])
        for key in ("calib_range", "trapezoid", "residual_px"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


# Operator trapezoids sit 6 px too high in the image: a systematic placement
# error that dominates the 0-3 px click perturbations.
MANUAL_OFFSET_PX = (0.0, -6.0) * 4

SCENE_PRESETS = {
    "scene1": SceneSpec(id="scene1", calib_range=(5.0, 44.0), trapezoid=(6.0, 40.0, 3.5),
                        residual_px=MANUAL_OFFSET_PX),
    "scene2": SceneSpec(id="scene2", calib_range=(5.0, 49.0), trapezoid=(6.0, 45.0, 3.5),
                        residual_px=MANUAL_OFFSET_PX),
    "exact": SceneSpec(id="exact", calib_range=(5.0, 44.0), trapezoid=(6.0, 40.0, 3.5)),
}


@dataclass(frozen=True)
class CalibrationSample:
    pixel: PixelPoint
    truth: GroundPoint
    id: int = 0


@dataclass(frozen=True)
class Scene:
    """``src``/``dst`` is the operator's trapezoid (including any residual
    placement error); ``true_src`` is the exact projection of ``dst``."""

    id: str
    camera: CameraModel
    calib_range: tuple
    src: Quad
    dst: Quad
    trajectories: tuple  # tuple of (N_i, 2) ground-point arrays
    spec: Optional[SceneSpec] = None
    true_src: Optional[Quad] = None

    def trajectory_points(self) -> np.ndarray:
        return np.concatenate([np.asarray(t, dtype=float) for t in self.trajectories], axis=0)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "camera": asdict(self.camera),
            "calib_range": list(self.calib_range),
            "trapezoid": {"src": self.src.to_json(), "dst": self.dst.to_json(),
                          "true_src": (self.true_src or self.src).to_json()},
            "trajectories": [np.asarray(t).tolist() for t in self.trajectories],
            "distance_distribution": "triangular stand-in (not measured traffic)",
            "spec": self.spec.to_json() if self.spec is not None else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Scene":
        spec = SceneSpec.from_json(d["spec"]) if d.get("spec") else None
        return cls(
            id=d["id"],
            camera=CameraModel(**d["camera"]),
            calib_range=tuple(d["calib_range"]),
            src=Quad.from_json(d["trapezoid"]["src"], "pixel"),
            dst=Quad.from_json(d["trapezoid"]["dst"], "ground"),
            trajectories=tuple(np.asarray(t, dtype=float) for t in d["trajectories"]),
            spec=spec,
            true_src=Quad.from_json(d["trapezoid"].get("true_src", d["trapezoid"]["src"]), "pixel"),
        )


def visible_half_width(cam: CameraModel, y):
    """Largest |x| on the ground at forward distance ``y`` that stays in the image."""
    _, _, zc = _camera_coords(cam, 0.0, np.asarray(y, dtype=float))
    return cam.cx * zc / cam.f


def sample_distances(spec: SceneSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    lo, hi = spec.calib_range
    mode = lo + spec.peak_fraction * (hi - lo)
    return rng.triangular(lo, mode, hi, size=n)


def triangular_cdf(y, lo, mode, hi):
    y = np.clip(np.asarray(y, dtype=float), lo, hi)
    left = (y - lo) ** 2 / ((hi - lo) * (mode - lo)) if mode > lo else np.ones_like(y)
    right = 1.0 - (hi - y) ** 2 / ((hi - lo) * (hi - mode)) if hi > mode else np.zeros_like(y)
    return np.where(y <= mode, left, right)


def generate_scene(spec: SceneSpec, seed: int) -> Scene:
    """Build the ground-truth trapezoid and test trajectories.

    Each trajectory is a pedestrian walk: forward distances are drawn from
    the scene distribution and visited in order, with a slowly drifting
    lateral offset kept inside the road and the camera frustum.
    """
    cam = spec.camera
    true_src, dst = true_trapezoid(cam, *spec.trapezoid)
    src = Quad.from_array(true_src.as_array() + np.reshape(spec.residual_px, (4, 2)), "pixel")
    rng = np.random.default_rng(seed)
    trajectories = []
    for _ in range(spec.n_trajectories):
        ys = np.sort(sample_distances(spec, rng, spec.points_per_trajectory))
        if rng.random() < 0.5:
            ys = ys[::-1]
        x0 = rng.uniform(-spec.lateral_half_width, spec.lateral_half_width)
        drift = rng.normal(0.0, 0.05, size=spec.points_per_trajectory).cumsum()
        limit = np.minimum(spec.lateral_half_width, 0.95 * visible_half_width(cam, ys))
        xs = np.clip(x0 + drift, -limit, limit)
        trajectories.append(np.column_stack([xs, ys]))
    return Scene(spec.id, cam, tuple(spec.calib_range), src, dst, tuple(trajectories), spec, true_src)


def calibration_points(scene: Scene, distances, noise_px: float = 0.0, rng=None) -> list:
    """Calibration objects straight ahead of the camera at the given ranges.

    Pixels are exact projections unless ``noise_px`` > 0, in which case
    Gaussian detection noise drawn from ``rng`` is added.
    """
    lo, hi = scene.calib_range
    out = []
    for i, d in enumerate(distances):
        if not lo - 1e-9 <= d <= hi + 1e-9:
            raise OutOfRange(f"calibration distance {d} outside {scene.calib_range}")
        g = GroundPoint(0.0, float(d))
        p = project(scene.camera, g, strict=True)
        if noise_px > 0.0:
            p = PixelPoint(*noisy_pixels(np.array(p), noise_px, rng))
        out.append(CalibrationSample(p, g, i))
    return out


def noisy_pixels(pixels: np.ndarray, sigma_px: float, rng: np.random.Generator) -> np.ndarray:
    """Optional Gaussian detection noise; identity when ``sigma_px == 0``."""
    if sigma_px <= 0.0:
        return pixels
    return pixels + rng.normal(0.0, sigma_px, size=pixels.shape)
