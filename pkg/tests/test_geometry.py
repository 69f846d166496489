import math

import numpy as np
import pytest
from scipy.integrate import quad

from fockverify.geometry import (
    ConfigPoint,
    LogRadialVector,
    MomentumVector,
    PointBatch,
    log_norm,
    log_tilted_interval,
    make_rng,
    norm,
    sample_ball,
    sample_log_shell,
    tilted_log_density,
)


@pytest.mark.parametrize("v, expected", [((0, 0, 0), 0.0), ((1, 0, 0), 1.0), ((3, 4, 0), 5.0)])
def test_norm_examples(v, expected):
    assert norm(MomentumVector(*v)) == expected
    assert norm(np.array(v)) == expected


def test_log_norm_examples():
    assert log_norm(MomentumVector(1, 0, 0)) == 0.0
    assert log_norm(LogRadialVector((1.0, 0.0, 0.0), 50.0)) == 50.0
    assert log_norm(MomentumVector(math.e, 0, 0)) == pytest.approx(1.0, abs=1e-15)


def test_log_norm_rejects_zero_vector():
    with pytest.raises(ValueError):
        log_norm(MomentumVector(0, 0, 0))


def test_log_radial_round_trip():
    v = MomentumVector(1.5, -2.0, 0.25)
    back = v.to_log_radial().to_cartesian()
    np.testing.assert_allclose(back.as_array(), v.as_array(), rtol=1e-15)


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, "norm", 3).random(5)
    b = make_rng(7, "norm", 3).random(5)
    c = make_rng(7, "norm", 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_shell_volume_by_weighted_mean():
    rng = make_rng(1, "shell")
    _, t, logw = sample_log_shell(rng, 0.0, math.log(2.0), 200_000)
    w = np.exp(logw)
    est, se = w.mean(), w.std(ddof=1) / math.sqrt(w.size)
    assert abs(est - 4 * math.pi * 7 / 3) < 4 * se
    assert 4 * math.pi * 7 / 3 == pytest.approx(29.32, abs=0.01)


def test_inverse_cube_on_shell_is_exact():
    # 1/|k|^3 cancels the flat-law weight exactly, so every sample is the answer
    a, b = 2.0, 50.0
    rng = make_rng(2, "shell")
    _, t, logw = sample_log_shell(rng, math.log(a), math.log(b), 1000)
    vals = np.exp(logw - 3 * t)
    np.testing.assert_allclose(vals, 4 * math.pi * (math.log(b) - math.log(a)), rtol=1e-12)


def test_degenerate_shell_rejected():
    with pytest.raises(ValueError):
        sample_log_shell(make_rng(0), 1.0, 1.0, 10)


def test_ball_examples():
    rng = make_rng(3, "ball")
    _, t, logw = sample_ball(rng, 1.0, 200_000)
    np.testing.assert_allclose(np.exp(logw), 4 * math.pi / 3)
    vals = np.exp(logw + 2 * t)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 4 * math.pi / 5) < 4 * se
    with pytest.raises(ValueError):
        sample_ball(rng, 0.0, 10)


@pytest.mark.parametrize("tilt", [-3.0, -0.5, 0.0, 0.5, 3.0])
def test_tilted_interval_density_normalised(tilt):
    lo, hi = -1.0, 2.0
    total, _ = quad(lambda t: math.exp(tilted_log_density(np.array([t]), lo, hi, tilt)[0]), lo, hi, epsabs=0, epsrel=1e-12)
    assert total == pytest.approx(1.0, rel=1e-10)
    s, logd = log_tilted_interval(make_rng(4), lo, hi, tilt, 1000)
    assert np.all((s >= lo) & (s <= hi))
    np.testing.assert_allclose(logd, tilted_log_density(s, lo, hi, tilt), rtol=1e-12)


def test_tilted_interval_wide_positive_tilt_stays_finite():
    s, logd = log_tilted_interval(make_rng(5), 0.0, 1e6, 3.0, 1000)
    assert np.all(np.isfinite(s)) and np.all(np.isfinite(logd))
    assert np.all(s <= 1e6)


def test_affine_cancels_huge_photons_symbolically():
    # p = q + k_1 with |k_1| = e^1000; p - k_1 must come back as q exactly
    dirs = np.array([[[1.0, 0.0, 0.0]]])
    b = PointBatch(dirs, np.array([[1000.0]]), np.array([[0.5, 0.0, 0.0]]), np.array([[1]]))
    vec, lg = b.affine([-1], 1)
    np.testing.assert_allclose(vec, [[0.5, 0.0, 0.0]])
    _, lg_big = b.affine([0], 1)
    assert lg_big[0] == 1000.0


def test_batch_from_points_and_back():
    pt = ConfigPoint.from_cartesian([(1.0, 0.0, 0.0), (0.0, 2.0, 0.0)], (0.0, 0.0, 3.0))
    b = PointBatch.from_points([pt, pt])
    assert b.size == 2 and b.n == 2
    back = b.point(1)
    assert back.photons[1].norm() == pytest.approx(2.0)
    assert back.fermion.norm() == pytest.approx(3.0)
