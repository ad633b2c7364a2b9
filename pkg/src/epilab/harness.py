"""Verification reports for entropy-power and Fisher-information inequalities.

Every check returns a :class:`VerificationReport` whose ``lhs`` is the side
that the inequality asserts to be larger, so ``margin = lhs - rhs`` is
nonnegative when the inequality holds.

Error budgets:

* remainder integrals contribute their quadrature, tail and head estimates;
* grid inputs add a spatial term, the change of the margin when the same
  check is rerun on the grid with every other node dropped;
* a rounding floor proportional to ``|lhs| + |rhs|`` is always added.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .density import (
    Density,
    GaussianDensity,
    GridDensity,
    Weights,
    describe,
    marginalize,
    product,
    scale_blocks,
    sum_density,
)
from .errors import PreconditionError
from .flow import (
    DEFAULT_NODES,
    DEFAULT_T,
    FlowTrace,
    flow_trace,
    is_smooth,
    linearized_remainder_R,
    linearized_remainder_S,
    ou_evolve,
    remainder_R,
    remainder_S,
    weighted_sum_density,
)
from .functionals import (
    conditional_entropies,
    entropy,
    entropy_power,
    fisher_matrix,
    fisher_of_sum,
    fisher_scalar,
)
from .supermodularity import LsmReport, certify

ANALYTIC_TOL = 1e-8
GRID_TOL = 5e-3
MECHANISM_TOL = 5e-3
COND_MAX = 1e12
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class FlowParams:
    T: float = DEFAULT_T
    nodes: int = DEFAULT_NODES
    s0: Optional[float] = None


@dataclass(frozen=True)
class VerificationReport:
    id: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float
    verdict: str
    inputs: dict
    numeric_budget: float
    extra: dict = field(default_factory=dict)

    @property
    def verified(self) -> bool:
        return self.verdict == "verified"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "numeric_budget": self.numeric_budget,
            "inputs": self.inputs,
            "extra": _jsonable(self.extra),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def decide(margin: float, tolerance: float, budget: float) -> str:
    """verified / violated / inconclusive from a margin and its error bars."""
    if not math.isfinite(margin):
        return "inconclusive"
    if margin >= -(tolerance + budget):
        return "verified"
    if margin < -(tolerance + 2 * budget):
        return "violated"
    return "inconclusive"


def default_tolerance(density: Density) -> float:
    return ANALYTIC_TOL if isinstance(density, GaussianDensity) else GRID_TOL


def rounding_floor(lhs: float, rhs: float) -> float:
    return float(64 * _EPS * (abs(lhs) + abs(rhs)) + 1e-14)


def grid_rounding(density: GridDensity, lhs: float, rhs: float) -> float:
    """Rounding allowance for quadratures over every node of a grid."""
    return rounding_floor(lhs, rhs) * math.sqrt(density.values.size)


def make_report(
    id: str,
    lhs: float,
    rhs: float,
    tolerance: float,
    budget: float,
    inputs: dict,
    extra: Optional[dict] = None,
    verdict: Optional[str] = None,
) -> VerificationReport:
    lhs, rhs = float(lhs), float(rhs)
    margin = lhs - rhs
    budget = float(budget) + rounding_floor(lhs, rhs)
    return VerificationReport(
        id=id,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        tolerance=float(tolerance),
        verdict=verdict or decide(margin, tolerance, budget),
        inputs=inputs,
        numeric_budget=budget,
        extra=extra or {},
    )


def _inputs(density: Density, lam=None, **more) -> dict:
    out = {"density": describe(density)}
    if lam is not None:
        out["weights"] = np.asarray(getattr(lam, "values", lam), dtype=float).tolist()
    out.update(more)
    return out


@dataclass
class _Side:
    """Result of evaluating both sides on one resolution."""

    lhs: float
    rhs: float
    budget: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def _evaluate(
    id: str,
    density: Density,
    compute: Callable[[Density], _Side],
    tolerance: Optional[float],
    spatial: bool,
    lam=None,
    **inputs,
) -> VerificationReport:
    side = compute(density)
    budget = side.budget
    extra = dict(side.extra)
    if isinstance(density, GridDensity):
        budget += grid_rounding(density, side.lhs, side.rhs)
        if spatial:
            coarse = compute(density.coarsen())
            extra["spatial_error"] = abs(side.margin - coarse.margin)
            budget += extra["spatial_error"]
    tol = default_tolerance(density) if tolerance is None else tolerance
    return make_report(id, side.lhs, side.rhs, tol, budget, _inputs(density, lam, **inputs), extra)


def _marginals(density: Density) -> list:
    return [marginalize(density, [i]) for i in range(density.blocks.n)]


def marginal_entropy_powers(density: Density) -> np.ndarray:
    return np.array([entropy_power(q) for q in _marginals(density)])


def conditional_entropy_powers(density: Density) -> np.ndarray:
    return np.exp(2.0 * conditional_entropies(density) / density.blocks.d)


def is_independent(density: Density, tol: float = 1e-8) -> bool:
    b = density.blocks
    if b.n == 1:
        return True
    if isinstance(density, GaussianDensity):
        S = density.cov
        mask = np.kron(1 - np.eye(b.n), np.ones((b.d, b.d))).astype(bool)
        return bool(np.all(np.abs(S[mask]) <= tol * np.abs(S).max()))
    prod = product(_marginals(density)).values
    return bool(np.max(np.abs(prod - density.values)) <= tol * np.max(density.values))


# ---------------------------------------------------------------------------
# classical and Fisher-information inequalities


def verify_classical_epi(density: Density, tolerance=None, spatial: bool = True) -> VerificationReport:
    """N(X_1 + ... + X_n) >= sum_i N(X_i) for independent blocks."""
    if not is_independent(density):
        raise PreconditionError("classical EPI needs independent blocks")

    def compute(p):
        return _Side(entropy_power(sum_density(p)), float(np.sum(marginal_entropy_powers(p))))

    return _evaluate("classical_epi", density, compute, tolerance, spatial)


def verify_lambda_fisher(density: Density, lam, tolerance=None, spatial: bool = True) -> VerificationReport:
    """lam^T I lam >= (sum lam)^2 J for any real weights."""
    lam = np.asarray(getattr(lam, "values", lam), dtype=float).reshape(-1)
    if lam.shape != (density.blocks.n,):
        raise ValueError(f"need {density.blocks.n} weights")

    def compute(p):
        I = fisher_matrix(p).entries
        return _Side(float(lam @ I @ lam), float(lam.sum() ** 2 * fisher_of_sum(p)))

    return _evaluate("lambda_fisher", density, compute, tolerance, spatial, lam)


def verify_optimized_stam(density: Density, tolerance=None, spatial: bool = True) -> VerificationReport:
    """1/J >= <1, I^{-1} 1> when the Fisher matrix is invertible."""
    I0 = fisher_matrix(density).entries
    cond = float(np.linalg.cond(I0))
    if not cond < COND_MAX:
        tol = default_tolerance(density) if tolerance is None else tolerance
        J = fisher_of_sum(density)
        return make_report(
            "optimized_stam", 1.0 / J, float("nan"), tol, 0.0, _inputs(density),
            {"condition_number": cond, "reason": "singular Fisher matrix"}, verdict="inconclusive",
        )

    def compute(p):
        I = fisher_matrix(p).entries
        ones = np.ones(p.blocks.n)
        return _Side(1.0 / fisher_of_sum(p), float(ones @ np.linalg.solve(I, ones)))

    rep = _evaluate("optimized_stam", density, compute, tolerance, spatial)
    rep.extra["condition_number"] = cond
    return rep


def verify_weighted_fisher(density: Density, lam, tolerance=None, spatial: bool = True) -> VerificationReport:
    """lam^T I lam >= I(sum lam_i X_i) for normalized weights."""
    lam = lam if isinstance(lam, Weights) else Weights(lam)

    def compute(p):
        I = fisher_matrix(p).entries
        return _Side(float(lam.values @ I @ lam.values), fisher_scalar(weighted_sum_density(p, lam)))

    return _evaluate("weighted_fisher", density, compute, tolerance, spatial, lam)


# ---------------------------------------------------------------------------
# flow-based inequalities


def _flow(flow: Optional[FlowParams]) -> FlowParams:
    return flow or FlowParams()


def _trace(p: Density, lam, flow: FlowParams, T: Optional[float] = None, nodes: Optional[int] = None, rescaled=False) -> FlowTrace:
    return flow_trace(
        p, lam, T=flow.T if T is None else T, nodes=flow.nodes if nodes is None else nodes,
        s0=flow.s0 if not is_smooth(p) else None, rescaled=rescaled,
    )


def _start_time(p: Density, flow: FlowParams) -> float:
    if is_smooth(p):
        return 0.0
    from .flow import NONSMOOTH_S0

    return NONSMOOTH_S0 if flow.s0 is None else flow.s0


def _linearized(
    id: str,
    density: Density,
    lam,
    t_list: Sequence[float],
    deficit: Callable[[Density, np.ndarray], float],
    remainder: Callable,
    flow: Optional[FlowParams],
    tolerance,
    spatial: bool,
) -> list:
    lam = lam if isinstance(lam, Weights) else Weights(lam)
    flow = _flow(flow)
    nodes = max(8, flow.nodes // 2)
    reports = []
    for t in t_list:
        t = float(t)

        def compute(p, t=t):
            a0 = deficit(p, lam.values)
            if t == 0:
                return _Side(a0, a0, 0.0, {"t": 0.0, "remainder": 0.0})
            at = deficit(ou_evolve(p, t), lam.values)
            s0 = _start_time(p, flow)
            if t <= s0:
                raise PreconditionError(f"t={t} is inside the skipped interval [0, {s0}]")
            est = remainder(_trace(p, lam, flow, T=t, nodes=nodes), lam)
            return _Side(a0 + est.value, at, est.budget, {"t": t, "remainder": est.to_dict()})

        reports.append(_evaluate(f"{id}[t={t:g}]", density, compute, tolerance, spatial, lam, t=t))
    return reports


def _marginal_deficit(p: Density, lam: np.ndarray) -> float:
    h_sum = entropy(weighted_sum_density(p, lam))
    return h_sum - float(np.sum(lam**2 * np.array([entropy(q) for q in _marginals(p)])))


def _conditional_deficit(p: Density, lam: np.ndarray) -> float:
    h_sum = entropy(weighted_sum_density(p, lam))
    return h_sum - float(np.sum(lam**2 * conditional_entropies(p)))


def verify_dependent_linearized(density, lam, t_list=(0.5, 1.0, 2.0), flow=None, tolerance=None, spatial=True) -> list:
    """For each t: deficit at 0 plus lam^T R_t lam >= deficit at t, where the
    deficit is h(sum lam_i Y_i) - sum lam_i^2 h(Y_i)."""
    return _linearized(
        "dependent_linearized", density, lam, t_list, _marginal_deficit, linearized_remainder_R, flow, tolerance, spatial
    )


def verify_conditional_linearized(density, lam, t_list=(0.5, 1.0, 2.0), flow=None, tolerance=None, spatial=True) -> list:
    """As :func:`verify_dependent_linearized` with conditional entropies and
    the conditional remainder S_t."""
    if density.blocks.n < 2:
        raise PreconditionError("conditional inequalities need at least two blocks")
    return _linearized(
        "conditional_linearized", density, lam, t_list, _conditional_deficit, linearized_remainder_S, flow, tolerance, spatial
    )


def _corrected_side(p: Density, powers: np.ndarray, flow: FlowParams, which: str) -> tuple:
    lam = Weights.from_powers(powers)
    trace = _trace(scale_blocks(p, lam, "divide"), lam, flow, rescaled=True)
    est = (remainder_R if which == "R" else remainder_S)(trace, lam)
    total = float(np.sum(powers))
    rhs = total * math.exp(-est.value)
    budget = rhs * math.expm1(est.budget)
    return lam, trace, est, rhs, budget


def verify_dependent_epi(density: Density, flow=None, tolerance=None, spatial: bool = True) -> VerificationReport:
    """N(sum X_i) >= (sum_i N(X_i)) exp(-Rbar) with entropy-power weights."""
    flow = _flow(flow)

    def compute(p):
        powers = marginal_entropy_powers(p)
        lam, _, est, rhs, budget = _corrected_side(p, powers, flow, "R")
        extra = {"Rbar": est.to_dict(), "weights": lam.values, "sum_entropy_powers": float(np.sum(powers))}
        return _Side(entropy_power(sum_density(p)), rhs, budget, extra)

    return _evaluate("dependent_epi", density, compute, tolerance, spatial)


def _offdiag_max(trace: FlowTrace) -> float:
    n = trace.blocks.n
    if n < 2:
        return 0.0
    mask = ~np.eye(n, dtype=bool)
    return float(trace.fisher[:, mask].max())


def verify_conditional_epi_clean(density: Density, tolerance=None, spatial: bool = True) -> VerificationReport:
    """N(sum X_i) >= sum_i exp((2/d) h(X_i | X_j, j != i))."""
    if density.blocks.n < 2:
        raise PreconditionError("conditional inequalities need at least two blocks")

    def compute(p):
        return _Side(entropy_power(sum_density(p)), float(np.sum(conditional_entropy_powers(p))))

    return _evaluate("conditional_epi_clean", density, compute, tolerance, spatial)


def verify_conditional_epi(density: Density, flow=None, tolerance=None, spatial: bool = True) -> VerificationReport:
    """N(sum X_i) >= (sum_i conditional entropy powers) exp(-Sbar).

    ``extra["clean"]`` carries the report without the exp(-Sbar) factor and
    ``extra["clean_condition"]`` whether flow off-diagonals stayed <= tol.
    """
    if density.blocks.n < 2:
        raise PreconditionError("conditional inequalities need at least two blocks")
    flow = _flow(flow)
    state = {}

    def compute(p):
        powers = conditional_entropy_powers(p)
        lam, trace, est, rhs, budget = _corrected_side(p, powers, flow, "S")
        state.setdefault("offdiag", _offdiag_max(trace))
        extra = {"Sbar": est.to_dict(), "weights": lam.values, "sum_conditional_powers": float(np.sum(powers))}
        return _Side(entropy_power(sum_density(p)), rhs, budget, extra)

    rep = _evaluate("conditional_epi", density, compute, tolerance, spatial)
    clean = verify_conditional_epi_clean(density, tolerance, spatial)
    rep.extra["clean"] = clean
    rep.extra["max_flow_offdiag"] = state["offdiag"]
    rep.extra["clean_condition"] = state["offdiag"] <= MECHANISM_TOL
    return rep


def verify_supermodular_epi(
    density: Density, flow=None, tolerance=None, spatial: bool = True, certificate: Optional[LsmReport] = None
) -> VerificationReport:
    """Clean conditional EPI for log-supermodular densities.

    Without a passing certificate the verdict is inconclusive and the
    inequality's own verdict is kept in ``extra["inequality_verdict"]``.  With
    one, the flow off-diagonals of the Fisher matrix must also stay below
    5e-3, otherwise the verdict is downgraded to inconclusive.
    """
    flow = _flow(flow)
    cert = certificate or certify(density)
    clean = verify_conditional_epi_clean(density, tolerance, spatial)
    extra = {"certificate": cert, "inequality_verdict": clean.verdict}
    verdict = clean.verdict
    if not cert.holds:
        verdict = "inconclusive"
        extra["reason"] = "log-supermodularity certificate failed"
    else:
        lam = Weights.from_powers(conditional_entropy_powers(density))
        trace = _trace(scale_blocks(density, lam, "divide"), lam, flow, rescaled=True)
        off = _offdiag_max(trace)
        extra["max_flow_offdiag"] = off
        if off > MECHANISM_TOL and verdict == "verified":
            verdict = "inconclusive"
            extra["reason"] = "flow Fisher off-diagonals not <= 0"
    return make_report(
        "supermodular_epi", clean.lhs, clean.rhs, clean.tolerance,
        clean.numeric_budget - rounding_floor(clean.lhs, clean.rhs), clean.inputs, extra, verdict=verdict,
    )


def rioul_condition_check(density: Density, t_list: Optional[Sequence[float]] = None, flow=None, tolerance=None) -> VerificationReport:
    """Largest eigenvalue of I(s) - diag(I(Y_i(s))) along the rescaled flow.

    The reported margin is minus the largest eigenvalue over all times, so
    the condition holds when the report is verified.  On success the clean
    dependent EPI (sum of entropy powers without correction) is cross-checked.
    """
    flow = _flow(flow)
    powers = marginal_entropy_powers(density)
    lam = Weights.from_powers(powers)
    xbar = scale_blocks(density, lam, "divide")
    if t_list is None:
        trace = _trace(xbar, lam, flow, rescaled=True)
        times = trace.nodes
        mats = trace.fisher - np.stack([np.diag(r) for r in trace.marginal_fisher])
    else:
        times = np.asarray(t_list, dtype=float)
        mats = []
        for t in times:
            y = ou_evolve(xbar, t)
            I = fisher_matrix(y).entries
            marg = [fisher_scalar(marginalize(y, [i])) for i in range(density.blocks.n)]
            mats.append(I - np.diag(marg))
        mats = np.array(mats)
    eig = np.array([np.linalg.eigvalsh((M + M.T) / 2)[-1] for M in mats])
    worst = float(eig.max())
    tol = default_tolerance(density) if tolerance is None else tolerance
    extra = {"times": times, "max_eigenvalue": eig, "weights": lam.values}
    rep = make_report("rioul_condition", 0.0, worst, tol, 0.0, _inputs(density, lam), extra)
    if rep.verified:
        lhs = entropy_power(sum_density(density))
        rep.extra["cross_check"] = make_report(
            "dependent_epi_clean", lhs, float(np.sum(powers)), tol, 0.0, _inputs(density)
        )
    return rep


def hao_jog_comparison(density: Density, symmetric: bool = False, tolerance=None, spatial: bool = True) -> VerificationReport:
    """h(sum X_i / sqrt(n)) >= hbar(X)/n, with hbar the erasure entropy.

    The verdict is asserted only when ``density`` is LSM-certified; with
    ``symmetric`` the comparison against h(X)/n is reported as well.  The
    bound hbar(X) <= h(X) is reported in ``extra["erasure_bound"]``.
    """
    n, d = density.blocks.n, density.blocks.d
    if n < 2:
        raise PreconditionError("the comparison needs at least two blocks")

    def compute(p):
        lhs = entropy(sum_density(p)) - 0.5 * d * math.log(n)
        hbar = float(np.sum(conditional_entropies(p)))
        return _Side(lhs, hbar / n, 0.0, {"h_joint_over_n": entropy(p) / n, "hbar": hbar})

    rep = _evaluate("hao_jog", density, compute, tolerance, spatial)
    cert = certify(density)
    h = rep.extra["h_joint_over_n"] * n
    erasure = make_report(
        "erasure_bound", h, rep.extra["hbar"], rep.tolerance, rep.numeric_budget * n, rep.inputs
    )
    extra = {**rep.extra, "certificate": cert, "erasure_bound": erasure}
    if symmetric:
        extra["symmetric_form"] = make_report(
            "hao_jog_symmetric", rep.lhs, rep.extra["h_joint_over_n"], rep.tolerance, rep.numeric_budget, rep.inputs
        )
    verdict = rep.verdict if cert.holds else "inconclusive"
    if not cert.holds:
        extra["inequality_verdict"] = rep.verdict
    return make_report(
        "hao_jog", rep.lhs, rep.rhs, rep.tolerance, rep.numeric_budget - rounding_floor(rep.lhs, rep.rhs),
        rep.inputs, extra, verdict=verdict,
    )
