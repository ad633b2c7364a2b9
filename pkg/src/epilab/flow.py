"""Ornstein-Uhlenbeck flow and the Fisher-defect time integrals.

Y(t) = e^{-t} X + sqrt(1 - e^{-2t}) Z with Z standard normal and independent
of X.  Time integrals over [s0, T] use Gauss-Legendre nodes in u = e^{-2s},
so that ds = du / (2u) and integrands decaying like e^{-2s} become smooth
polynomial-like functions of u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .density import (
    BlockStructure,
    Density,
    GaussianDensity,
    GridAxis,
    GridDensity,
    PAD_SIGMAS,
    Weights,
    marginalize,
    product,
    scale_blocks,
    smooth_grid,
    sum_density,
)
from .errors import NegativeTimeError, PreconditionError, TailNotDecayingError
from .functionals import entropy, fisher_matrix, fisher_scalar

DEFAULT_T = 8.0
DEFAULT_NODES = 64
NONSMOOTH_S0 = 1e-3
# integrand magnitude below which the tail test is not applied
TAIL_NOISE = 1e-10


def ou_evolve(density: Density, t: float) -> Density:
    """Law of e^{-t} X + sqrt(1 - e^{-2t}) Z.

    On grids the scaling and the Gaussian convolution are done in one pass
    (see :func:`epilab.density.smooth_grid`).  The output keeps the number of
    nodes per axis and covers ``[a*lo - 6 sigma, a*hi + 6 sigma]``, which moves
    smoothly with ``t``.
    """
    t = float(t)
    if not t >= 0:
        raise NegativeTimeError(f"flow time must be nonnegative, got {t}")
    if t == 0:
        return density
    a = math.exp(-t)
    var = -math.expm1(-2 * t)
    if isinstance(density, GaussianDensity):
        k = density.blocks.total
        return GaussianDensity(a * density.mean, a * a * density.cov + var * np.eye(k), density.blocks)
    sigma = math.sqrt(var)
    pad = PAD_SIGMAS * sigma
    out = tuple(GridAxis(a * ax.lo - pad, a * ax.hi + pad, ax.m) for ax in density.axes)
    return smooth_grid(density, a, sigma, out)


def debruijn_check(density: Density, t: float, dt: float) -> float:
    """|central difference of h(Y(t)) - (I(Y(t)) - n d)|."""
    if not t > dt > 0:
        raise ValueError(f"need t > dt > 0, got t={t}, dt={dt}")
    m = density.blocks.total
    slope = (entropy(ou_evolve(density, t + dt)) - entropy(ou_evolve(density, t - dt))) / (2 * dt)
    return abs(slope - (fisher_scalar(ou_evolve(density, t)) - m))


def entropy_reconstruction(density: Density, t: float, nodes: int = 32) -> tuple[float, float]:
    """(h(Y(t)), h(X) + int_0^t I(Y(s)) ds - n d t).

    The two numbers agree when the entropy-Fisher flow identity holds.
    """
    if not t > 0:
        raise ValueError("need t > 0")
    x, w = leggauss(nodes)
    s = t * (x + 1) / 2
    integral = t / 2 * sum(wi * fisher_scalar(ou_evolve(density, si)) for si, wi in zip(s, w))
    m = density.blocks.total
    return entropy(ou_evolve(density, t)), entropy(density) + integral - m * t


# ---------------------------------------------------------------------------
# flow traces


def flow_nodes(T: float, nodes: int, s0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and ds-weights on [s0, T], sorted by ``s``."""
    if not T > s0 >= 0:
        raise ValueError(f"need T > s0 >= 0, got T={T}, s0={s0}")
    x, wx = leggauss(nodes)
    ua, ub = math.exp(-2 * T), math.exp(-2 * s0)
    u = (ub - ua) / 2 * x + (ua + ub) / 2
    wu = wx * (ub - ua) / 2
    s = -0.5 * np.log(u)
    ws = wu / (2 * u)
    order = np.argsort(s)
    return s[order], ws[order]


def _weights_array(lam, n: int) -> np.ndarray:
    if lam is None:
        return np.full(n, 1.0 / math.sqrt(n))
    v = np.asarray(getattr(lam, "values", lam), dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"need {n} weights, got {v.size}")
    return v


@dataclass(frozen=True)
class FlowTrace:
    """Fisher quantities of the flowed joint law sampled at time nodes.

    ``fisher[k]`` is I(Y(s_k)), ``indep_fisher[k]`` the Fisher matrix of the
    flowed product of the initial marginals, ``marginal_fisher[k, i]`` is
    I(Y_i(s_k)) and ``complement_fisher[k, i]`` is I(Y_j(s_k), j != i).
    """

    nodes: np.ndarray
    weights: np.ndarray
    fisher: np.ndarray
    indep_fisher: np.ndarray
    marginal_fisher: np.ndarray
    complement_fisher: np.ndarray
    T: float
    s0: float
    blocks: BlockStructure
    rescaled: bool = False
    lam: Optional[np.ndarray] = None
    coarse: Optional["FlowTrace"] = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("flow nodes must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _node(density: Density, marginals: list, s: float):
    y = ou_evolve(density, s)
    n = density.blocks.n
    I = fisher_matrix(y).entries
    marg = np.array([fisher_scalar(marginalize(y, [i])) for i in range(n)])
    if n == 1:
        comp = np.zeros(1)
    elif n == 2:
        comp = marg[::-1].copy()
    else:
        comp = np.array([fisher_scalar(marginalize(y, [j for j in range(n) if j != i])) for i in range(n)])
    indep = product([ou_evolve(q, s) for q in marginals])
    return I, fisher_matrix(indep).entries, marg, comp


def is_smooth(density: Density) -> bool:
    return isinstance(density, GaussianDensity) or density.smooth


def flow_trace(
    density: Density,
    lam=None,
    T: float = DEFAULT_T,
    nodes: int = DEFAULT_NODES,
    *,
    s0: Optional[float] = None,
    rescaled: bool = False,
    richardson: bool = True,
) -> FlowTrace:
    """Sample the Fisher quantities of the flow at Gauss-Legendre nodes.

    ``rescaled=True`` records that ``density`` is already the law of
    X_i / lambda_i for the weights in force; the theorem remainders refuse
    traces without it.  For non-smooth grids the flow starts at ``s0``
    (default 1e-3).  With ``richardson`` a half-size trace is attached for
    quadrature error estimates.
    """
    if s0 is None:
        s0 = 0.0 if is_smooth(density) else NONSMOOTH_S0
    n = density.blocks.n
    lam_arr = None if lam is None else _weights_array(lam, n)
    s, w = flow_nodes(T, nodes, s0)
    marginals = [marginalize(density, [i]) for i in range(n)]
    rows = [_node(density, marginals, si) for si in s]
    coarse = None
    if richardson and nodes >= 4:
        coarse = flow_trace(
            density, lam, T, nodes // 2, s0=s0, rescaled=rescaled, richardson=False
        )
    return FlowTrace(
        nodes=s,
        weights=w,
        fisher=np.array([r[0] for r in rows]),
        indep_fisher=np.array([r[1] for r in rows]),
        marginal_fisher=np.array([r[2] for r in rows]),
        complement_fisher=np.array([r[3] for r in rows]),
        T=float(T),
        s0=float(s0),
        blocks=density.blocks,
        rescaled=rescaled,
        lam=lam_arr,
        coarse=coarse,
    )


# ---------------------------------------------------------------------------
# remainders


@dataclass(frozen=True)
class RemainderEstimate:
    """Value of a time integral with its error estimates.

    ``quadrature_error`` is the change against the half-size node set,
    ``tail_bound`` bounds the discarded (T, inf) part and ``head_bound`` the
    skipped [0, s0] part (zero for smooth inputs).
    """

    value: float
    quadrature_error: float
    tail_bound: float
    T: float
    head_bound: float = 0.0
    integrand: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def budget(self) -> float:
        return self.quadrature_error + self.tail_bound + self.head_bound

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "quadrature_error": self.quadrature_error,
            "tail_bound": self.tail_bound,
            "head_bound": self.head_bound,
            "T": self.T,
        }


def _integrand_R(trace: FlowTrace, lam: np.ndarray, linear: bool) -> np.ndarray:
    if linear:
        D = trace.fisher - trace.indep_fisher
    else:
        D = trace.fisher - np.stack([np.diag(row) for row in trace.marginal_fisher])
    return np.einsum("i,kij,j->k", lam, D, lam)


def _integrand_S(trace: FlowTrace, lam: np.ndarray) -> np.ndarray:
    quad = np.einsum("i,kij,j->k", lam, trace.fisher, lam)
    diag = np.trace(trace.fisher, axis1=1, axis2=2)
    return quad - diag + trace.complement_fisher @ (lam * lam)


def _estimate(trace: FlowTrace, f: np.ndarray, coarse_f, infinite: bool) -> RemainderEstimate:
    value = trace.integrate(f)
    quad = 0.0 if coarse_f is None else abs(value - trace.coarse.integrate(coarse_f))
    tail = 0.0
    if infinite:
        first, last = abs(f[0]), abs(f[-1])
        if last > first and last > TAIL_NOISE:
            raise TailNotDecayingError(
                f"integrand at s={trace.nodes[-1]:.3g} ({f[-1]:.3g}) exceeds the first node ({f[0]:.3g})"
            )
        C = float(max(abs(f[-1]) * math.exp(2 * trace.nodes[-1]), abs(f[-2]) * math.exp(2 * trace.nodes[-2])))
        tail = C * math.exp(-2 * trace.T)
    head = 0.0
    if trace.s0 > 0:
        # integrable singularity no worse than s^{-1/2} near the start
        head = float(2 * abs(f[0]) * math.sqrt(trace.s0 * trace.nodes[0]))
    return RemainderEstimate(value, float(quad), tail, trace.T, head, integrand=f)


def _remainder(trace: FlowTrace, lam, build, infinite: bool, prefactor: float) -> RemainderEstimate:
    lam = _weights_array(lam, trace.blocks.n)
    f = prefactor * build(trace, lam)
    cf = None if trace.coarse is None else prefactor * build(trace.coarse, lam)
    return _estimate(trace, f, cf, infinite)


def _require_rescaled(trace: FlowTrace):
    if not trace.rescaled:
        raise PreconditionError("trace must be computed on the rescaled blocks X_i / lambda_i")


def remainder_R(trace: FlowTrace, lam) -> RemainderEstimate:
    """(2/d) lam^T int_0^inf [I(s) - diag(I(Y_i(s)))] ds lam on a rescaled trace."""
    _require_rescaled(trace)
    Weights(_weights_array(lam, trace.blocks.n))
    build = lambda tr, l: _integrand_R(tr, l, linear=False)  # noqa: E731
    return _remainder(trace, lam, build, True, 2.0 / trace.blocks.d)


def remainder_S(trace: FlowTrace, lam) -> RemainderEstimate:
    """(2/d) int_0^inf S_s ds on a rescaled trace, where
    S_s = lam^T I lam - sum_i I_ii + sum_i lam_i^2 I(Y_j, j != i)."""
    _require_rescaled(trace)
    Weights(_weights_array(lam, trace.blocks.n))
    return _remainder(trace, lam, _integrand_S, True, 2.0 / trace.blocks.d)


def linearized_remainder_R(trace: FlowTrace, lam) -> RemainderEstimate:
    """lam^T int_{s0}^T [I(s) - I~(s)] ds lam, the finite-horizon dependence term."""
    build = lambda tr, l: _integrand_R(tr, l, linear=True)  # noqa: E731
    return _remainder(trace, lam, build, False, 1.0)


def linearized_remainder_S(trace: FlowTrace, lam) -> RemainderEstimate:
    """int_{s0}^T S_s ds without prefactor."""
    return _remainder(trace, lam, _integrand_S, False, 1.0)


def remainder_matrix(trace: FlowTrace) -> np.ndarray:
    """int (I(s) - I~(s)) ds as a matrix."""
    return np.einsum("k,kij->ij", trace.weights, trace.fisher - trace.indep_fisher)


def weighted_sum_density(density: Density, lam) -> Density:
    """Law of sum_i lam_i X_i."""
    return sum_density(scale_blocks(density, lam, "multiply"))
