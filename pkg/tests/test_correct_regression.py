import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundmap.correct_regression import (
    ErrorModel, apply_correction, apply_correction_many, calib_errors, fit_error_model, fit_from_samples,
    overshoot_sign, solve_unclamped,
)
from groundmap.errors import AtOrigin
from groundmap.geometry import GroundPoint, Homography
from groundmap.simulator import CalibrationSample, calibration_points


def lstsq_oracle(d, e):
    d = np.asarray(d, dtype=float)
    M = np.column_stack([d**2, d])
    return np.linalg.lstsq(M, np.asarray(e, dtype=float), rcond=None)[0]


def test_zero_errors():
    m = fit_error_model([(5, 0), (20, 0), (40, 0)])
    assert (m.a, m.b) == (0.0, 0.0)


def test_planted_recovery():
    d = [5.0, 20.0, 40.0]
    m = fit_error_model([(x, 0.01 * x * x + 0.1 * x) for x in d])
    assert m.a == pytest.approx(0.01, abs=1e-9) and m.b == pytest.approx(0.1, abs=1e-9)
    assert m.mode == "quadratic"
    resid = [m.magnitude(x) - (0.01 * x * x + 0.1 * x) for x in d]
    assert np.linalg.norm(resid) < 1e-9


def test_linear_fallback():
    m = fit_error_model([(20, 2), (20, 2), (20, 2)])
    assert m.mode == "linear_fallback"
    assert m.a == 0.0 and m.b == pytest.approx(0.1)


def test_concave_clamps_without_refit():
    pairs = [(5, 1.0), (20, 1.5), (40, 1.6)]
    a, b, _ = solve_unclamped(pairs)
    oracle = lstsq_oracle([p[0] for p in pairs], [p[1] for p in pairs])
    assert a < 0 and oracle[0] < 0
    assert (a, b) == pytest.approx(tuple(oracle), abs=1e-9)
    m = fit_error_model(pairs)
    assert m.a == 0.0 and m.b == b


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1.0, 60.0), min_size=3, max_size=3, unique=True),
       st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3))
def test_matches_lstsq_oracle(d, e):
    if max(d) - min(d) < 1e-3:
        return
    a, b, _ = solve_unclamped(list(zip(d, e)))
    oa, ob = lstsq_oracle(d, e)
    assert abs(a - oa) <= 1e-9 * max(1.0, abs(oa)) and abs(b - ob) <= 1e-9 * max(1.0, abs(ob))


def test_apply_correction_signs():
    model = ErrorModel(0.0, 0.2)
    assert apply_correction((0.0, 10.0), model) == pytest.approx((0.0, 12.0))
    inward = ErrorModel(0.0, 0.2, direction_sign=-1)
    assert apply_correction((0.0, 10.0), inward) == pytest.approx((0.0, 8.0))
    assert apply_correction((3.0, 4.0), ErrorModel(0.0, 0.0)) == (3.0, 4.0)
    with pytest.raises(AtOrigin):
        apply_correction((0.0, 0.0), model)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0.5, 60), st.floats(0, 0.01), st.floats(0, 0.1), st.sampled_from([-1, 1]))
def test_radial_and_angle_preserving(x, y, a, b, sign):
    o = (0.3, -0.2)
    p = (x, y)
    q = apply_correction(p, ErrorModel(a, b, direction_sign=sign), o)
    cross = (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])
    assert abs(cross) < 1e-12 * max(1.0, math.hypot(*p) ** 2)
    if sign == 1:  # outward moves cannot cross the origin
        assert math.atan2(q[1] - o[1], q[0] - o[0]) == pytest.approx(math.atan2(p[1] - o[1], p[0] - o[0]), abs=1e-12)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    pts = rng.uniform(1, 40, size=(50, 2))
    m = ErrorModel(0.003, 0.02, direction_sign=-1)
    many = apply_correction_many(pts, m, (0.5, 0.0))
    assert np.allclose(many, [apply_correction(p, m, (0.5, 0.0)) for p in pts], atol=1e-12)


def test_calib_errors_basic(H_true, scene1):
    samples = calibration_points(scene1, [5, 25, 44])
    assert all(e < 1e-6 for _, e, _ in calib_errors(H_true, samples))
    ident = Homography.identity()
    rows = calib_errors(ident, [CalibrationSample((3.0, 4.0), GroundPoint(0.0, 0.0))])
    assert rows[0][1] == pytest.approx(5.0)


def test_horizon_shift_gives_quadratic_growth(H_true, scene1):
    shifted = Homography(H_true.h @ np.array([[1.0, 0, 0], [0, 1, -2.0], [0, 0, 1]]))
    rows = calib_errors(shifted, calibration_points(scene1, [5, 25, 44]))
    ratio = rows[2][1] / rows[0][1]
    assert ratio == pytest.approx((44 / 5) ** 2, rel=0.4)


def test_exact_self_correction():
    # points overshoot radially by e(d) = 0.004 d^2 + 0.03 d measured at the mapped range
    a, b = 0.004, 0.03
    truths, mapped = [], []
    for y in (6.0, 20.0, 40.0):
        # solve d - (a d^2 + b d) = y for the mapped range d
        d = ((1 - b) - math.sqrt((1 - b) ** 2 - 4 * a * y)) / (2 * a)
        truths.append((0.0, y))
        mapped.append((0.0, d))
    pairs = [(p[1], p[1] - g[1]) for p, g in zip(mapped, truths)]
    sign = overshoot_sign(mapped, truths)
    model = fit_error_model(pairs, direction_sign=sign)
    assert sign == -1
    fixed = apply_correction_many(mapped, model)
    assert np.abs(fixed - np.array(truths)).max() < 1e-9


def test_fit_from_samples_reduces_calib_error(H_true, scene1):
    shifted = Homography(H_true.h @ np.array([[1.0, 0, 0], [0, 1, -2.0], [0, 0, 1]]))
    samples = calibration_points(scene1, [5, 25, 44])
    model = fit_from_samples(shifted, samples)
    rows = calib_errors(shifted, samples)
    fixed = apply_correction_many([r[2] for r in rows], model)
    after = np.hypot(*(fixed - np.array([s.truth for s in samples])).T).mean()
    assert after < 0.1 * np.mean([r[1] for r in rows])
    assert ErrorModel.from_json(model.to_json()) == model
