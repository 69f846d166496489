import math

import numpy as np
import pytest

from fockverify.geometry import PointBatch, make_rng
from fockverify.sets import EShell, FSet
from fockverify.states import (
    BallCutoff,
    CoordMap,
    FockState,
    Gaussian,
    KineticSum,
    PnPower,
    RadialPower,
    SectorFunction,
    SetIndicator,
    Term,
    canonical_factors,
    gaussian_sector,
    make_base_chi,
    permute,
    symmetrize,
)


def random_batch(seed, n, size=200, scale=1.5):
    rng = make_rng(seed, "states", n)
    return PointBatch.from_cartesian(rng.normal(0, scale, (size, n, 3)), rng.normal(0, scale, (size, 3)))


def single_point(photons, fermion):
    return PointBatch.from_cartesian(np.array([photons], dtype=float).reshape(1, -1, 3), np.array([fermion], dtype=float))


def test_zero_function_evaluates_to_zero():
    b = random_batch(0, 2)
    np.testing.assert_array_equal(SectorFunction(2).evaluate(b), 0)


def test_gaussian_peak_is_coefficient():
    f = gaussian_sector(0, [], 1.0, coefficient=2.5 - 1j)
    assert f.evaluate(single_point(np.zeros((0, 3)), [0, 0, 0]))[0] == 2.5 - 1j


def test_radial_power_example():
    f = SectorFunction(1, (Term(3.0, (RadialPower(-0.5, CoordMap.slot(0, 1)),)),))
    val = f.evaluate(single_point([[4.0, 0, 0]], [1, 2, 3]))[0]
    assert val == pytest.approx(3.0 * 0.5, rel=1e-15)


def test_log_domain_keeps_tiny_values():
    # exp(-1e6) underflows but its log is kept
    f = SectorFunction(1, (Term(1.0, (PnPower(-1e6 / 2.0, ()),)),))
    b = single_point([[1, 0, 0]], [0, 0, 0])
    scale, mant = f.evaluate_log(b)
    assert scale[0] == pytest.approx(-1e6 / 2.0, rel=1e-15)
    assert mant[0] == 1.0


def test_factor_algebra_merges_powers():
    c = CoordMap.slot(0, 2)
    fs = canonical_factors([RadialPower(-0.5, c), RadialPower(-2.5, c), PnPower(-1.0, (0,)), PnPower(1.0, (0,))])
    assert fs == (RadialPower(-3.0, c),)


def test_symmetrize_fixed_point():
    f = gaussian_sector(3, [1.0, 1.0, 1.0], 0.7)
    g = symmetrize(f)
    b = random_batch(1, 3, 1000)
    np.testing.assert_allclose(g.evaluate(b), f.evaluate(b), rtol=1e-14)


def test_symmetrize_two_term_oracle():
    f = gaussian_sector(2, [0.5, 2.0], 1.0)
    g = symmetrize(f)
    b = random_batch(2, 2, 500)
    swapped = b.permute([1, 0])
    expected = 0.5 * (f.evaluate(b) + f.evaluate(swapped))
    np.testing.assert_allclose(g.evaluate(b), expected, rtol=1e-14)


def test_symmetrize_refuses_large_n():
    with pytest.raises(ValueError):
        symmetrize(gaussian_sector(7, [1.0] * 7, 1.0))


def test_permute_moves_slots():
    f = gaussian_sector(3, [0.5, 1.0, 2.0], 1.0)
    perm = [2, 0, 1]
    b = random_batch(3, 3)
    moved = b.permute(perm)
    np.testing.assert_allclose(permute(f, perm).evaluate(b), f.evaluate(moved), rtol=1e-14)


def test_base_chi_vanishes_outside_ball():
    f = make_base_chi(1, sigma=1.0, support_radius=3.0)
    inside = single_point([[1, 0, 0]], [0, 1, 0])
    outside_k = single_point([[3.5, 0, 0]], [0, 1, 0])
    outside_p = single_point([[1, 0, 0]], [0, 0, 3.0])
    assert f.evaluate(inside)[0] != 0
    assert f.evaluate(outside_k)[0] == 0
    assert f.evaluate(outside_p)[0] == 0


def test_simplify_cancels_and_collects():
    f = gaussian_sector(1, [1.0], 1.0)
    assert (f - f).simplify().is_zero()
    g = (f + f.scaled(2.0)).simplify()
    assert len(g.terms) == 1 and g.terms[0].coefficient == 3.0


def test_fock_json_round_trip():
    sig = CoordMap.slot(1, 2)
    f = gaussian_sector(2, [1.0, 2.0], 0.5, coefficient=1 - 2j, label=(1,)).times(
        RadialPower(-0.5, sig),
        BallCutoff(0.1, 5.0, CoordMap.fermion_only(2)),
        SetIndicator(EShell(2), (0, 1)),
        SetIndicator(FSet(2), (0, 1), complement=True),
        PnPower(-1.0, (0,)),
        KineticSum((CoordMap.slot(0, 2), CoordMap((1, 1), 1))),
    )
    state = FockState({0: gaussian_sector(0, [], 1.0), 2: f})
    text = state.to_json()
    back = FockState.from_json(text)
    assert back.to_json() == text
    b = random_batch(4, 2)
    np.testing.assert_array_equal(back.sector(2).evaluate(b), f.evaluate(b))


def test_fock_state_arithmetic():
    a = FockState({0: gaussian_sector(0, [], 1.0)})
    b = FockState({1: gaussian_sector(1, [1.0], 1.0)})
    s = a + b
    assert s.photon_numbers() == [0, 1]
    assert s.truncate(0).photon_numbers() == [0]
    with pytest.raises(ValueError):
        FockState({1: gaussian_sector(0, [], 1.0)})


def test_huge_fermion_shift_is_handled():
    # a Gaussian of p + k_1 with |k_1| = e^500 and no cancellation is zero, not nan
    f = SectorFunction(1, (Term(1.0, (Gaussian(1.0, CoordMap((1,), 1)),)),))
    b = PointBatch(np.array([[[1.0, 0, 0]]]), np.array([[500.0]]), np.zeros((1, 3)))
    assert f.evaluate(b)[0] == 0
    assert math.isfinite(f.evaluate_log(b)[0][0]) or f.evaluate_log(b)[1][0] == 0
