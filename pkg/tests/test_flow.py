import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator

from epilab import (
    BlockStructure,
    FlowTrace,
    GaussianDensity,
    Weights,
    entropy,
    fisher_matrix,
    flow_trace,
    ou_evolve,
    product,
    remainder_R,
    remainder_S,
    scale_blocks,
)
from epilab.density import permute_blocks
from epilab.errors import NegativeTimeError, NonPositiveLambdaError, PreconditionError, TailNotDecayingError
from epilab.flow import (
    NONSMOOTH_S0,
    debruijn_check,
    entropy_reconstruction,
    flow_nodes,
    linearized_remainder_R,
    remainder_matrix,
)

from oracles import random_spd, rng

EQUAL = Weights.equal(2)


def rescaled_trace(p, lam=EQUAL, **kw):
    return flow_trace(scale_blocks(p, lam, "divide"), lam, rescaled=True, **kw)


def ou_cov(cov, s):
    a2 = math.exp(-2 * s)
    return a2 * np.asarray(cov) + (1 - a2) * np.eye(len(cov))


def quad_remainders(cov, lam):
    """R-bar and S-bar of a bivariate Gaussian by adaptive quadrature."""
    lam = np.asarray(lam)
    cbar = np.asarray(cov) / np.outer(lam, lam)

    def fR(s):
        C = ou_cov(cbar, s)
        P = np.linalg.inv(C)
        return 2 * lam @ (P - np.diag(1 / np.diag(C))) @ lam

    def fS(s):
        C = ou_cov(cbar, s)
        P = np.linalg.inv(C)
        comp = 1 / np.diag(C)[::-1]
        return 2 * (lam @ P @ lam - np.trace(P) + comp @ (lam * lam))

    return quad(fR, 0, np.inf, epsabs=1e-13, limit=200)[0], quad(fS, 0, np.inf, epsabs=1e-13, limit=200)[0]


# --- ou_evolve ------------------------------------------------------------------


def test_standard_gaussian_is_fixed():
    g = GaussianDensity.from_cov(np.eye(2))
    for t in (0.1, 1.0, 5.0):
        assert np.allclose(ou_evolve(g, t).cov, np.eye(2), atol=1e-15)


def test_ou_of_variance_four_at_log2():
    assert ou_evolve(GaussianDensity.from_cov([[4.0]]), math.log(2)).cov[0, 0] == pytest.approx(1.75, abs=1e-14)


def test_time_zero_is_identity(quartic):
    assert ou_evolve(quartic, 0.0) is quartic


def test_negative_time_rejected(quartic):
    with pytest.raises(NegativeTimeError):
        ou_evolve(quartic, -0.1)


def test_semigroup_analytic():
    g = GaussianDensity.from_cov(random_spd(rng(5), 3))
    a, b = ou_evolve(ou_evolve(g, 0.3), 0.7), ou_evolve(g, 1.0)
    assert np.max(np.abs(a.cov - b.cov)) <= 1e-8
    assert np.max(np.abs(a.mean - b.mean)) <= 1e-8


@pytest.mark.parametrize(("s", "t"), [(0.2, 0.5), (0.5, 1.0)])
def test_semigroup_grid(quartic, s, t):
    two = ou_evolve(ou_evolve(quartic, s), t)
    one = ou_evolve(quartic, s + t)
    interp = RegularGridInterpolator([ax.nodes for ax in one.axes], one.values, bounds_error=False, fill_value=0.0)
    pts = np.stack(two.mesh(), axis=-1)
    assert np.max(np.abs(interp(pts) - two.values)) <= 5e-3


def test_ou_preserves_mass_and_product_structure(uniform2):
    y = ou_evolve(uniform2, 0.3)
    assert y.integrate() == pytest.approx(1.0, abs=1e-12)
    assert y.smooth


# --- de Bruijn ----------------------------------------------------------------------


def test_debruijn_gaussian():
    assert debruijn_check(GaussianDensity.from_cov([[4.0]]), 0.5, 1e-3) < 1e-5


def test_debruijn_stationary():
    assert debruijn_check(GaussianDensity.from_cov(np.eye(2)), 0.5, 1e-3) < 1e-9


def test_debruijn_quartic_grid(quartic):
    assert debruijn_check(quartic, 0.3, 1e-2) < 5e-3


def test_debruijn_needs_ordered_times(quartic):
    with pytest.raises(ValueError):
        debruijn_check(quartic, 0.1, 0.2)


@pytest.mark.parametrize("t", [0.5, 1.5])
def test_entropy_reconstruction(quartic, t):
    for p in (quartic, GaussianDensity.equicorrelated(0.5, var=2.0)):
        direct, rebuilt = entropy_reconstruction(p, t)
        assert abs(direct - rebuilt) <= 1e-3


# --- nodes and traces ----------------------------------------------------------------


def test_flow_nodes_integrate_exponential():
    s, w = flow_nodes(8.0, 32)
    assert np.all(np.diff(s) > 0)
    integral = float(np.dot(w, np.exp(-2 * s)))
    assert integral == pytest.approx((1 - math.exp(-16)) / 2, rel=1e-12)


def test_flow_nodes_reject_bad_interval():
    with pytest.raises(ValueError):
        flow_nodes(1.0, 8, s0=2.0)


def test_independent_gaussian_product_matches_copies():
    p = product(GaussianDensity.from_cov([[1.0]]), GaussianDensity.from_cov([[4.0]]))
    tr = flow_trace(p, EQUAL, nodes=16)
    assert np.max(np.abs(tr.fisher - tr.indep_fisher)) <= 1e-12


def test_gaussian_trace_off_diagonal_closed_form():
    tr = rescaled_trace(GaussianDensity.equicorrelated(0.5), nodes=32)
    cbar = GaussianDensity.equicorrelated(0.5).cov * 2
    for s, I in zip(tr.nodes, tr.fisher):
        C = ou_cov(cbar, s)
        r_s = C[0, 1] / math.sqrt(C[0, 0] * C[1, 1])
        assert I[0, 1] == pytest.approx(-r_s / (1 - r_s**2) / math.sqrt(C[0, 0] * C[1, 1]), abs=1e-12)


def test_trace_matrices_are_psd(quartic_anti):
    tr = rescaled_trace(quartic_anti, nodes=16, richardson=False)
    for I in tr.fisher:
        assert np.allclose(I, I.T)
        assert np.linalg.eigvalsh(I)[0] >= -1e-8


def test_non_smooth_trace_starts_after_zero(uniform2):
    tr = rescaled_trace(uniform2, nodes=16)
    assert tr.s0 == NONSMOOTH_S0
    assert tr.nodes[0] > NONSMOOTH_S0
    est = remainder_R(tr, EQUAL)
    assert est.head_bound >= 0


def test_trace_approaches_identity_at_horizon(quartic, gauss_neg):
    for p in (quartic, gauss_neg):
        tr = rescaled_trace(p, T=6.0, nodes=32, richardson=False)
        assert np.max(np.abs(tr.fisher[-1] - np.eye(2))) <= 5e-3


def test_trace_rejects_unsorted_nodes():
    b = BlockStructure(1, 1)
    z = np.zeros((2, 1, 1))
    with pytest.raises(ValueError):
        FlowTrace(np.array([1.0, 0.5]), np.ones(2), z, z, np.zeros((2, 1)), np.zeros((2, 1)), 2.0, 0.0, b)


# --- remainders --------------------------------------------------------------------


@pytest.mark.parametrize("r", [0.5, -0.5, 0.8])
def test_gaussian_remainders_closed_form(r):
    est_R = remainder_R(rescaled_trace(GaussianDensity.equicorrelated(r)), EQUAL)
    est_S = remainder_S(rescaled_trace(GaussianDensity.equicorrelated(r)), EQUAL)
    assert est_R.value == pytest.approx(math.log(2 / (2 + 2 * r)), abs=1e-6)
    assert est_S.value == pytest.approx(math.log(2 * (1 - r * r) / (2 + 2 * r)), abs=1e-6)


def test_remainders_match_adaptive_quadrature_with_unequal_weights():
    cov = np.array([[1.0, 0.4], [0.4, 3.0]])
    lam = Weights.from_powers(np.diag(cov))
    R_oracle, S_oracle = quad_remainders(cov, lam.values)
    p = GaussianDensity.from_cov(cov)
    assert remainder_R(rescaled_trace(p, lam), lam).value == pytest.approx(R_oracle, abs=1e-7)
    assert remainder_S(rescaled_trace(p, lam), lam).value == pytest.approx(S_oracle, abs=1e-7)


def test_remainder_reproduced_by_refined_flow():
    g = GaussianDensity.equicorrelated(0.5)
    base = remainder_R(rescaled_trace(g), EQUAL)
    fine = remainder_R(rescaled_trace(g, T=16.0, nodes=128), EQUAL)
    assert abs(base.value - fine.value) <= 1e-3


def test_grid_remainder_matches_gaussian_closed_form(grid_gauss_pos):
    est = remainder_R(rescaled_trace(grid_gauss_pos), EQUAL)
    assert est.value == pytest.approx(math.log(2 / 3), abs=1e-4)


def test_independent_remainders_vanish(uniform2):
    for p in (product(GaussianDensity.from_cov([[1.0]]), GaussianDensity.from_cov([[4.0]])), uniform2):
        tr = rescaled_trace(p)
        for fn in (remainder_R, remainder_S):
            est = fn(tr, EQUAL)
            assert abs(est.value) <= 1e-6 + est.tail_bound


def test_S_sign_follows_correlation(gauss_pos, gauss_neg):
    assert remainder_S(rescaled_trace(gauss_pos), EQUAL).value <= 0
    assert remainder_S(rescaled_trace(gauss_neg), EQUAL).value > 0


def test_degenerate_weights_rejected(gauss_pos):
    tr = rescaled_trace(gauss_pos, nodes=8)
    with pytest.raises(NonPositiveLambdaError):
        remainder_R(tr, [1.0, 0.0])


def test_remainder_requires_rescaled_trace(gauss_pos):
    tr = flow_trace(gauss_pos, EQUAL, nodes=8)
    for fn in (remainder_R, remainder_S):
        with pytest.raises(PreconditionError):
            fn(tr, EQUAL)


def test_growing_integrand_is_rejected():
    n = 8
    s, w = flow_nodes(4.0, n)
    b = BlockStructure(2, 1)
    off = np.linspace(0.0, 1.0, n)
    fisher = np.array([[[1.0, -o], [-o, 1.0]] for o in off])
    marg = np.ones((n, 2))
    tr = FlowTrace(s, w, fisher, fisher, marg, marg, 4.0, 0.0, b, rescaled=True)
    with pytest.raises(TailNotDecayingError):
        remainder_R(tr, EQUAL)


@pytest.mark.parametrize("nodes", [64, 128])
def test_estimates_are_nonnegative_and_refinement_is_consistent(quartic, nodes):
    base = remainder_R(rescaled_trace(quartic, nodes=nodes), EQUAL)
    fine = remainder_R(rescaled_trace(quartic, nodes=2 * nodes, richardson=False), EQUAL)
    assert base.quadrature_error >= 0 and base.tail_bound >= 0
    assert abs(fine.value - base.value) < 2 * base.quadrature_error


@pytest.mark.parametrize("fn", [remainder_R, remainder_S])
def test_remainders_symmetric_under_relabeling(fn, quartic, gauss_pos):
    lam = Weights(np.array([0.6, 0.8]))
    swapped = Weights(np.array([0.8, 0.6]))
    for p in (quartic, gauss_pos):
        a = fn(rescaled_trace(p, lam, nodes=32), lam).value
        b = fn(rescaled_trace(permute_blocks(p, [1, 0]), swapped, nodes=32), swapped).value
        assert a == pytest.approx(b, abs=1e-6)


def test_linearized_remainder_is_finite_horizon(gauss_pos):
    tr = flow_trace(gauss_pos, EQUAL, T=1.0, nodes=32)
    est = linearized_remainder_R(tr, EQUAL)
    assert est.tail_bound == 0.0
    M = remainder_matrix(tr)
    assert est.value == pytest.approx(EQUAL.values @ M @ EQUAL.values, abs=1e-12)


def test_remainder_to_dict_keys(gauss_pos):
    d = remainder_R(rescaled_trace(gauss_pos, nodes=16), EQUAL).to_dict()
    assert set(d) == {"value", "quadrature_error", "tail_bound", "head_bound", "T"}
    assert all(isinstance(v, float) for v in d.values())


def test_flow_fisher_matches_direct_evaluation(quartic):
    tr = flow_trace(quartic, EQUAL, nodes=8, richardson=False)
    k = 3
    direct = fisher_matrix(ou_evolve(quartic, tr.nodes[k])).entries
    assert np.array_equal(direct, tr.fisher[k])


def test_entropy_increases_toward_gaussian(quartic):
    hs = [entropy(ou_evolve(quartic, t)) for t in (0.0, 0.5, 1.0, 3.0)]
    assert hs[-1] == pytest.approx(math.log(2 * math.pi * math.e), abs=1e-2)
