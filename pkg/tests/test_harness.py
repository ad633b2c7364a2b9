import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epilab import (
    GaussianDensity,
    Weights,
    fisher_matrix,
    hao_jog_comparison,
    product,
    rioul_condition_check,
    verify_classical_epi,
    verify_conditional_epi,
    verify_conditional_epi_clean,
    verify_conditional_linearized,
    verify_dependent_epi,
    verify_dependent_linearized,
    verify_lambda_fisher,
    verify_optimized_stam,
    verify_supermodular_epi,
    verify_weighted_fisher,
)
from epilab.errors import PreconditionError
from epilab.harness import ANALYTIC_TOL, GRID_TOL, decide, make_report

from oracles import TWO_PI_E

EQUAL = Weights.equal(2)


def iid(*variances):
    return product(*[GaussianDensity.from_cov([[v]]) for v in variances])


# --- verdict rule -------------------------------------------------------------------


@pytest.mark.parametrize(
    ("margin", "expected"),
    [(0.0, "verified"), (-1.0, "verified"), (-1.2, "inconclusive"), (-1.5, "inconclusive"), (-1.6, "violated"), (math.nan, "inconclusive")],
)
def test_decide(margin, expected):
    assert decide(margin, tolerance=0.5, budget=0.5) == expected


def test_make_report_orients_margin():
    rep = make_report("x", 3.0, 1.0, 1e-8, 0.0, {})
    assert rep.margin == 2.0 and rep.verified
    assert rep.numeric_budget > 0


def test_default_tolerances(gauss_pos, quartic):
    assert verify_optimized_stam(gauss_pos).tolerance == ANALYTIC_TOL
    assert verify_optimized_stam(quartic, spatial=False).tolerance == GRID_TOL


# --- classical EPI -----------------------------------------------------------------------


def test_classical_epi_equal_gaussians():
    rep = verify_classical_epi(iid(1.0, 1.0))
    assert rep.margin == pytest.approx(0.0, abs=1e-10)
    assert rep.verified


def test_classical_epi_proportional_gaussians():
    rep = verify_classical_epi(iid(1.0, 4.0))
    assert rep.lhs == pytest.approx(TWO_PI_E * 5)
    assert rep.rhs == pytest.approx(TWO_PI_E * 5)


def test_classical_epi_uniform_square(uniform2):
    rep = verify_classical_epi(uniform2)
    assert rep.rhs == pytest.approx(2.0, abs=1e-10)
    assert rep.margin > 0 and rep.verified
    # the triangle law has entropy 1/2, so N = e; the grid route is O(h)
    assert abs(rep.lhs - math.e) < 0.05


def test_classical_epi_needs_independence(gauss_pos):
    with pytest.raises(PreconditionError):
        verify_classical_epi(gauss_pos)


# --- Fisher inequalities ---------------------------------------------------------------------


def test_lambda_fisher_optimizer_is_equality():
    g = GaussianDensity.from_cov([[1.0, 0.3], [0.3, 2.0]])
    lam = np.linalg.solve(fisher_matrix(g).entries, np.ones(2))
    rep = verify_lambda_fisher(g, lam)
    assert rep.margin == pytest.approx(0.0, abs=1e-10)


def test_lambda_fisher_single_block(grid_gauss_pos):
    rep = verify_lambda_fisher(grid_gauss_pos, [1.0, 0.0])
    assert rep.lhs == pytest.approx(4 / 3, abs=2e-2)
    assert rep.rhs == pytest.approx(1 / 3, abs=2e-2)
    assert rep.verified


def test_lambda_fisher_independent_unit_weights():
    rep = verify_lambda_fisher(iid(1.0, 1.0), [1.0, 1.0])
    assert (rep.lhs, rep.rhs) == pytest.approx((2.0, 2.0))


def test_lambda_fisher_accepts_negative_weights(gauss_neg):
    assert verify_lambda_fisher(gauss_neg, [1.0, -2.0]).verified


def test_optimized_stam_gaussian(gauss_pos):
    rep = verify_optimized_stam(gauss_pos)
    assert (rep.lhs, rep.rhs) == pytest.approx((3.0, 3.0))
    assert rep.verified


def test_optimized_stam_independent():
    rep = verify_optimized_stam(iid(1.0, 4.0))
    assert (rep.lhs, rep.rhs) == pytest.approx((5.0, 5.0))


def test_optimized_stam_quartic(quartic):
    rep = verify_optimized_stam(quartic)
    assert rep.margin >= -2e-2
    assert rep.verified


def test_optimized_stam_singular_is_inconclusive():
    rep = verify_optimized_stam(GaussianDensity.from_cov(np.diag([1e3, 2e-10])))
    assert rep.verdict == "inconclusive"
    assert rep.extra["condition_number"] >= 1e12


def test_weighted_fisher_gaussian_equality(gauss_pos):
    rep = verify_weighted_fisher(gauss_pos, EQUAL)
    assert rep.lhs == pytest.approx(2 / 3)
    assert rep.margin == pytest.approx(0.0, abs=1e-10)


def test_weighted_fisher_independent_case():
    lam = Weights(np.array([0.6, 0.8]))
    rep = verify_weighted_fisher(iid(1.0, 2.0), lam)
    assert rep.lhs == pytest.approx(0.36 + 0.64 / 2)
    assert rep.verified


def test_weighted_fisher_grid(grid_gauss_pos):
    rep = verify_weighted_fisher(grid_gauss_pos, EQUAL)
    assert rep.margin >= -2e-2 and rep.verified


# --- linearized flow inequalities -------------------------------------------------------------


def test_linearized_time_zero_is_exact(gauss_pos, quartic):
    for fn in (verify_dependent_linearized, verify_conditional_linearized):
        for p in (gauss_pos, quartic):
            (rep,) = fn(p, EQUAL, [0.0], spatial=False)
            assert rep.margin == 0.0


def test_dependent_linearized_gaussian(gauss_pos):
    reps = verify_dependent_linearized(gauss_pos, EQUAL)
    assert [r.id for r in reps] == ["dependent_linearized[t=0.5]", "dependent_linearized[t=1]", "dependent_linearized[t=2]"]
    assert all(r.margin >= -1e-4 and r.verified for r in reps)


def test_dependent_linearized_independent_deficit_decreases():
    reps = verify_dependent_linearized(iid(1.0, 4.0), Weights(np.array([0.6, 0.8])), [0.5, 1.0, 2.0])
    deficits = [r.rhs for r in reps]
    assert all(r.extra["remainder"]["value"] == pytest.approx(0.0, abs=1e-12) for r in reps)
    assert all(a >= b >= 0 for a, b in zip(deficits, deficits[1:]))


def test_conditional_linearized_gaussian(gauss_pos):
    assert all(r.margin >= -1e-4 for r in verify_conditional_linearized(gauss_pos, EQUAL))


def test_conditional_linearized_independent():
    assert all(r.margin >= -1e-4 for r in verify_conditional_linearized(iid(2.0, 0.5), EQUAL))


def test_conditional_linearized_grid(quartic):
    reps = verify_conditional_linearized(quartic, EQUAL, [0.5], spatial=False)
    assert reps[0].verified


# --- corrected EPIs ---------------------------------------------------------------------------------


def test_dependent_epi_independent_recovers_classical():
    p = iid(1.0, 4.0)
    rep = verify_dependent_epi(p)
    assert abs(rep.extra["Rbar"]["value"]) <= 1e-6
    assert rep.lhs == pytest.approx(verify_classical_epi(p).lhs)


def test_dependent_epi_negative_correlation(gauss_neg):
    rep = verify_dependent_epi(gauss_neg)
    assert rep.lhs == pytest.approx(TWO_PI_E)
    assert rep.extra["Rbar"]["value"] >= math.log(2) - 1e-6
    assert rep.verified


def test_dependent_epi_positive_correlation_saturates(gauss_pos):
    # the exact remainder is log(2/3) and the corrected bound is attained
    rep = verify_dependent_epi(gauss_pos)
    rbar = rep.extra["Rbar"]
    assert abs(rbar["value"] - math.log(2 / 3)) <= rbar["tail_bound"] + 1e-10
    assert abs(rep.margin) <= rep.numeric_budget
    assert rep.verified


def test_dependent_epi_grid(quartic):
    assert verify_dependent_epi(quartic).verified


def test_conditional_epi_positive_correlation(gauss_pos):
    rep = verify_conditional_epi(gauss_pos)
    clean = rep.extra["clean"]
    assert clean.lhs == pytest.approx(51.24, abs=1e-2)
    assert clean.rhs == pytest.approx(25.62, abs=1e-2)
    assert rep.verified and clean.verified
    assert rep.extra["clean_condition"]


def test_conditional_epi_negative_correlation(gauss_neg):
    rep = verify_conditional_epi(gauss_neg)
    clean = rep.extra["clean"]
    assert clean.lhs == pytest.approx(17.08, abs=1e-2)
    assert clean.verdict == "violated"
    assert rep.verified
    assert not rep.extra["clean_condition"]


def test_conditional_epi_independent_reduces_to_classical():
    p = iid(1.0, 3.0)
    rep = verify_conditional_epi(p)
    classical = verify_classical_epi(p)
    assert rep.extra["clean"].rhs == pytest.approx(classical.rhs)
    assert rep.lhs == pytest.approx(classical.lhs)


def test_conditional_epi_grid(quartic):
    assert verify_conditional_epi(quartic).verified


# --- supermodular EPI ---------------------------------------------------------------------------------


@pytest.mark.parametrize("r", [0.0, 0.3, 0.7])
def test_supermodular_epi_gaussian_margin(r):
    rep = verify_supermodular_epi(GaussianDensity.equicorrelated(r))
    assert rep.verified
    assert rep.margin == pytest.approx(TWO_PI_E * (2 * r + 2 * r * r), abs=1e-6)


def test_supermodular_epi_quartic(quartic):
    rep = verify_supermodular_epi(quartic)
    assert rep.verified
    assert rep.extra["max_flow_offdiag"] <= 5e-3


def test_supermodular_epi_without_certificate():
    rep = verify_supermodular_epi(GaussianDensity.equicorrelated(-0.3))
    assert rep.verdict == "inconclusive"
    assert rep.extra["inequality_verdict"] == "violated"


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.95, -0.01))
def test_gate_never_verifies_without_lsm(r):
    assert verify_supermodular_epi(GaussianDensity.equicorrelated(r)).verdict != "verified"


def test_gate_on_non_lsm_grid(quartic_anti):
    assert verify_supermodular_epi(quartic_anti).verdict != "verified"


# --- the Gaussian family ------------------------------------------------------------------------------------


def test_clean_margin_sign_pattern():
    rs = np.linspace(-0.9, 0.9, 21)
    margins = np.array([verify_conditional_epi_clean(GaussianDensity.equicorrelated(r)).margin for r in rs])
    assert np.all(margins[rs > 1e-12] > 0)
    assert np.all(margins[rs < -1e-12] < 0)
    assert abs(margins[10]) <= 1e-12
    upper = rs >= -0.5 - 1e-12
    assert np.all(np.diff(margins[upper]) > 0)


def test_clean_margin_is_not_monotone_below_minus_half():
    # 2 pi e (2r + 2r^2) has its minimum at r = -1/2
    m = {r: verify_conditional_epi_clean(GaussianDensity.equicorrelated(r)).margin for r in (-0.9, -0.5, -0.1)}
    assert m[-0.5] < m[-0.9] and m[-0.5] < m[-0.1]
    assert m[-0.5] == pytest.approx(-TWO_PI_E / 2)


# --- Rioul condition and Hao-Jog --------------------------------------------------------------------------


def test_rioul_product_gaussians():
    rep = rioul_condition_check(iid(1.0, 2.0))
    assert rep.verified
    assert rep.extra["cross_check"].verified


def test_rioul_single_block():
    assert rioul_condition_check(GaussianDensity.from_cov([[2.0]])).verified


def test_rioul_correlated_gaussian_reports_trajectory(gauss_pos):
    rep = rioul_condition_check(gauss_pos, t_list=[0.0, 0.5, 1.0])
    assert len(rep.extra["max_eigenvalue"]) == 3
    assert rep.margin == pytest.approx(-np.max(rep.extra["max_eigenvalue"]))


def test_hao_jog_iid_equality():
    rep = hao_jog_comparison(iid(1.0, 1.0), symmetric=True)
    half = 0.5 * math.log(TWO_PI_E)
    assert rep.lhs == pytest.approx(half)
    assert rep.extra["symmetric_form"].margin == pytest.approx(0.0, abs=1e-12)


def test_hao_jog_gaussian(gauss_pos):
    rep = hao_jog_comparison(gauss_pos)
    assert rep.lhs == pytest.approx(1.6217, abs=1e-4)
    assert rep.rhs == pytest.approx(1.2751, abs=1e-4)
    assert rep.verified
    assert rep.extra["erasure_bound"].verified


def test_hao_jog_quartic(quartic):
    assert hao_jog_comparison(quartic).verified


def test_hao_jog_needs_lsm_for_a_verdict(gauss_neg):
    rep = hao_jog_comparison(gauss_neg)
    assert rep.verdict == "inconclusive"
    assert "inequality_verdict" in rep.extra
    assert rep.extra["erasure_bound"].verified


# --- report invariants ------------------------------------------------------------------------------------


def test_reports_are_json_serializable(quartic, gauss_pos):
    reps = [verify_conditional_epi(gauss_pos), hao_jog_comparison(quartic, symmetric=True), verify_supermodular_epi(quartic)]
    for rep in reps:
        d = json.loads(json.dumps(rep.to_dict(), allow_nan=True))
        assert d["margin"] == rep.lhs - rep.rhs
        assert d["numeric_budget"] >= 0


@pytest.mark.parametrize("r", [-0.5, 0.0, 0.5])
def test_gaussian_margins_match_closed_forms(r):
    g = GaussianDensity.equicorrelated(r)
    assert verify_optimized_stam(g).margin == pytest.approx(0.0, abs=1e-6)
    assert verify_conditional_epi_clean(g).margin == pytest.approx(TWO_PI_E * (2 * r + 2 * r * r), abs=1e-6)
    # corrected forms are equalities for exchangeable Gaussians
    assert verify_dependent_epi(g).margin == pytest.approx(0.0, abs=1e-5)
    assert verify_conditional_epi(g).margin == pytest.approx(0.0, abs=1e-5)


def test_grid_spatial_error_is_reported(quartic):
    rep = verify_weighted_fisher(quartic, EQUAL)
    assert rep.extra["spatial_error"] >= 0
    assert rep.numeric_budget >= rep.extra["spatial_error"]


def test_grid_entropy_inputs_are_described(quartic):
    rep = verify_optimized_stam(quartic, spatial=False)
    assert rep.inputs["density"]["kind"] == "grid"
    assert len(rep.inputs["density"]["digest"]) == 16
