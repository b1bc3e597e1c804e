import numpy as np
import pytest

from groundmap.simulator import SCENE_PRESETS, CameraModel, generate_scene, ground_truth_homography


@pytest.fixture(scope="session")
def cam():
    return CameraModel()


@pytest.fixture(scope="session")
def H_true(cam):
    return ground_truth_homography(cam)


@pytest.fixture(scope="session")
def scene1():
    return generate_scene(SCENE_PRESETS["scene1"], 42)


def random_quad(rng, center=(960.0, 540.0), size=300.0, jitter=80.0):
    """Convex-ish quad around ``center`` in TL, TR, BR, BL order."""
    cx, cy = center
    base = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float) * size / 2
    return base + np.array([cx, cy]) + rng.uniform(-jitter, jitter, size=(4, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
