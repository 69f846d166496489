import json
import math

import pytest

from fockverify import verify as V
from fockverify.integrate import MCEstimate
from fockverify.operators import ChiRecursionSpec
from fockverify.states import SectorFunction, make_base_chi

# frozen reference values, computed once from the product formulas
C2_M0 = 2.5228646537770008
C1_M0 = 557.5699067456959
C3_N1 = 0.999995978541523


def est(mean, se, log_scale=0.0, **kw):
    return MCEstimate(mean, se, 1000, log_scale, **kw)


# comparison rules ----------------------------------------------------------


def test_leq_clear_pass_and_fail():
    assert V.compare_leq(est(1.0, 0.01), est(2.0, 0.01))[0] == V.PASS
    assert V.compare_leq(est(3.0, 0.01), est(2.0, 0.01))[0] == V.FAIL


def test_leq_uses_log_constant():
    a, b = est(1.0, 0.01, log_scale=-5000.0), est(1.0, 0.01, log_scale=-5001.0)
    assert V.compare_leq(a, b, log_c=2.0)[0] == V.PASS
    assert V.compare_leq(a, b, log_c=0.0)[0] == V.FAIL


def test_leq_within_three_sigma_passes():
    assert V.compare_leq(est(1.05, 0.02), est(1.0, 0.001))[0] == V.PASS
    assert V.compare_leq(est(1.2, 0.02), est(1.0, 0.001))[0] == V.FAIL


def test_leq_noisy_estimates():
    # noisy but many orders below the bound: pass; noisy near the bound: inconclusive
    assert V.compare_leq(est(1.0, 1.0, log_scale=-100.0), est(1.0, 0.01))[0] == V.PASS
    assert V.compare_leq(est(1.0, 1.0), est(1.0, 0.01))[0] == V.INCONCLUSIVE
    assert V.compare_leq(est(10.0, 10.0), est(1.0, 0.01))[0] == V.INCONCLUSIVE


def test_leq_rounding_sensitivity_is_inconclusive():
    a = est(1.0, 0.0, log_resolution=1.0)
    b = est(1.0, 0.0, log_resolution=1.0)
    assert V.compare_leq(a, b)[0] == V.INCONCLUSIVE


def test_leq_coverage_failure():
    assert V.compare_leq(est(1.0, 0.1, coverage_ok=False), est(2.0, 0.1))[0] == V.INCONCLUSIVE


def test_equal_rule():
    assert V.compare_equal(est(1.0, 0.01), est(1.02, 0.01))[0] == V.PASS
    assert V.compare_equal(est(1.0, 0.01), est(1.2, 0.01))[0] == V.FAIL
    assert V.compare_equal(est(0.0, 0.0), est(0.0, 0.0))[0] == V.PASS
    assert V.compare_equal(est(1.0, 2.0), est(1.5, 2.0))[0] == V.INCONCLUSIVE


def test_worst_status_and_result_dict():
    assert V.worst_status([V.PASS, V.INCONCLUSIVE]) == V.INCONCLUSIVE
    assert V.worst_status([V.PASS, V.FAIL, V.INCONCLUSIVE]) == V.FAIL
    assert V.worst_status([V.PASS]) == V.PASS
    r = V.CheckResult("x", V.PASS, 1.0, 1.0, "exact", runtime_s=3.0)
    assert "runtime_s" not in r.to_dict()
    with pytest.raises(ValueError):
        V.CheckResult("x", "maybe", 1.0, 1.0, "exact")


# constants -----------------------------------------------------------------


def test_constants_frozen():
    c2_fwd, c2_nested, _ = V.constant_C2(0)
    c1_fwd, c1_nested, _ = V.constant_C1(0)
    assert c2_fwd == pytest.approx(C2_M0, rel=1e-12)
    assert c1_fwd == pytest.approx(C1_M0, rel=1e-12)
    assert abs(c2_fwd - c2_nested) <= 1e-10 * c2_fwd
    assert abs(c1_fwd - c1_nested) <= 1e-10 * c1_fwd


def test_c3_small_N():
    est_ = V.estimate_constants()
    assert est_.C3_smallN[1] == pytest.approx(C3_N1, rel=1e-12)
    assert 0 < est_.C3_smallN[2] <= 1
    json.dumps(est_.to_dict())


def test_sector_bound_examples():
    assert math.exp(V.sector_bound_log(2)) == pytest.approx(1.446, abs=5e-4)
    assert math.exp(V.sector_bound_log(4)) == pytest.approx(0.0530, abs=5e-5)


def test_check_constants_passes():
    assert V.check_constants().status == V.PASS


# fast checks ---------------------------------------------------------------


def test_radial_integrals_check():
    r = V.check_radial_integrals()
    assert r.status == V.PASS
    assert r.runtime_s < 1.0


def test_set_lemma_small():
    r = V.check_set_lemma(3, trials=10_000, seed=1)
    assert r.status == V.PASS and r.observed == 0
    assert r.details["mutated_violations"] > 0


def test_membership_small():
    r = V.check_F_membership(n_max=3, points=2000, seed=2)
    assert r.status == V.PASS and r.observed == 0


def test_chi_support_zero_base_is_vacuous():
    spec = ChiRecursionSpec(0, SectorFunction(0), 2, 1.0)
    r = V.check_chi_support(spec=spec, seed=3)
    assert r.status == V.PASS and r.details["vacuous"]


@pytest.mark.parametrize("m", [0, 1])
def test_chi_support(m):
    assert V.check_chi_support(m, seed=4, points=300).status == V.PASS


def test_cancellation_linear_in_base():
    spec = ChiRecursionSpec(0, make_base_chi(0).scaled(2.0), 2, 1.0)
    assert V.check_cancellation(0, 2, seed=5, points=300, spec=spec).status == V.PASS


def test_cancellation_far_sector_is_identically_zero():
    r = V.check_cancellation(0, 4, seed=6, points=300)
    assert r.status == V.PASS
    assert r.details["simplified_terms"] == 0
    assert r.details["simplified_nonzero_points"] == 0


def test_norm_recursion_zero_base():
    spec = ChiRecursionSpec(0, SectorFunction(0), 4, 1.0)
    r = V.check_norm_recursion(seed=7, spec=spec)
    assert r.status == V.PASS and r.details["vacuous"]


def test_A_plus_divergence_slope():
    r = V.check_A_plus_divergence(seed=8)
    assert r.status == V.PASS
    assert r.observed == pytest.approx(2.0, abs=0.05)


def test_lower_bound_small_N():
    r = V.check_lower_bound_ingredients(1)
    assert r.status == V.PASS
    assert r.observed["threshold"] == pytest.approx(math.log(2.0), rel=1e-10)
    assert r.observed["C3"] == pytest.approx(C3_N1, rel=1e-12)


def test_cutoff_symmetry_small():
    r = V.check_cutoff_symmetry(1, 10.0, seed=9, n_samples=10_000)
    assert r.status == V.PASS


def test_full_symmetry_same_parity_is_trivial():
    r = V.check_full_symmetry_truncated(0, 0, seed=10, n_samples=2000)
    assert r.status == V.PASS


def test_checks_are_deterministic():
    a = V.check_set_lemma(3, trials=5000, seed=11).to_dict()
    b = V.check_set_lemma(3, trials=5000, seed=11).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
