"""Entropies, scores and Fisher information of block-structured densities.

All entropies are in nats.  On grids, scores are fourth-order central
differences of ``log(max(p, floor))`` (second-order stencils next to the
boundary) and
every integral is a trapezoid rule; nodes where ``p < floor`` contribute 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .density import (
    BlockStructure,
    Density,
    GaussianDensity,
    GridDensity,
    marginalize,
    sum_density,
    _sum_matrix,
)
from .errors import NonFiniteError, SingularCovarianceError

LOG_2PI_E = math.log(2 * math.pi * math.e)


@dataclass(frozen=True)
class FisherMatrix:
    """Gram matrix I_ij = E<rho_i, rho_j> of the blockwise scores."""

    entries: np.ndarray
    blocks: BlockStructure
    method: str

    def check(self, tol: float = 1e-8) -> "FisherMatrix":
        """Raise ``AssertionError`` unless symmetric and PSD within ``tol``."""
        e = self.entries
        assert np.allclose(e, e.T, rtol=0, atol=tol), "Fisher matrix is not symmetric"
        assert np.linalg.eigvalsh((e + e.T) / 2)[0] >= -tol, "Fisher matrix is not PSD"
        return self

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))


@dataclass(frozen=True)
class ScoreField:
    """rho(x) = -grad p / p, evaluated at points of shape ``(..., n*d)``."""

    blocks: BlockStructure
    evaluate: Callable[[np.ndarray], np.ndarray]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.evaluate(x)

    def block(self, x, i: int) -> np.ndarray:
        return self(x)[..., self.blocks.coords(i)]


@dataclass(frozen=True)
class ProjectionResidual:
    """Residual of the score-projection identity.

    ``residual`` is E|(sum l_i) rho_W(W) - sum l_i rho_i(X)|^2 and
    ``cross_terms[j]`` is E<rho_W(W), rho_j(X)> - J.
    """

    residual: float
    cross_terms: np.ndarray
    J: float


def _precision(g: GaussianDensity) -> np.ndarray:
    return g.precision


def _block_trace(M: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    n, d = blocks.n, blocks.d
    return np.einsum("ikjk->ij", M.reshape(n, d, n, d))


def _require_finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NonFiniteError(f"{what} is not finite")
    return x


# ---------------------------------------------------------------------------
# entropy


def entropy(density: Density) -> float:
    """Differential entropy -E log p."""
    if isinstance(density, GaussianDensity):
        sign, logdet = np.linalg.slogdet(density.cov)
        if sign <= 0:
            raise SingularCovarianceError("covariance is not positive definite")
        return 0.5 * density.blocks.total * LOG_2PI_E + 0.5 * logdet
    p = np.asarray(density.values)
    plogp = np.where(p >= density.floor, p * np.log(np.maximum(p, density.floor)), 0.0)
    return _require_finite(-density.integrate(plogp), "entropy")


def entropy_power(density: Density) -> float:
    """exp(2 h / d) of a single-block (d-dimensional) density."""
    if density.blocks.n != 1:
        raise ValueError("entropy power is defined here for one block; marginalize or sum first")
    return math.exp(2.0 * entropy(density) / density.blocks.d)


def conditional_entropy(density: Density, target: int) -> float:
    """h(X_i | X_j, j != i) = h(X) - h(X_j, j != i)."""
    n = density.blocks.n
    if n < 2:
        raise ValueError("conditional entropy needs at least two blocks")
    if not 0 <= target < n:
        raise IndexError(f"block {target} out of range for n={n}")
    rest = [j for j in range(n) if j != target]
    return entropy(density) - entropy(marginalize(density, rest))


def conditional_entropies(density: Density) -> np.ndarray:
    n = density.blocks.n
    h = entropy(density)
    return np.array([h - entropy(marginalize(density, [j for j in range(n) if j != i])) for i in range(n)])


def erasure_entropy(density: Density) -> float:
    """Sum over blocks of h(X_i | X_j, j != i)."""
    if density.blocks.n < 2:
        raise ValueError("erasure entropy needs at least two blocks")
    return float(np.sum(conditional_entropies(density)))


# ---------------------------------------------------------------------------
# scores and Fisher information


def central_difference(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order central difference along ``axis``.

    The two outermost nodes on each side fall back to second-order stencils.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.gradient(f, h, axis=0, edge_order=2)
    if f.shape[0] >= 5:
        out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    return np.moveaxis(out, 0, axis)


def log_gradients(density: GridDensity) -> list[np.ndarray]:
    """Central-difference gradient of log p along every grid axis."""
    L = density.log_values()
    return [central_difference(L, h, k) for k, h in enumerate(density.spacings)]


def score(density: Density) -> ScoreField:
    b = density.blocks
    if isinstance(density, GaussianDensity):
        P, mu = _precision(density), density.mean
        return ScoreField(b, lambda x: (x - mu) @ P.T)
    grads = np.stack(log_gradients(density), axis=-1)
    interp = RegularGridInterpolator([ax.nodes for ax in density.axes], -grads, method="linear")
    return ScoreField(b, lambda x: interp(x.reshape(-1, b.total)).reshape(x.shape))


def _grid_weights(density: GridDensity) -> np.ndarray:
    p = np.asarray(density.values)
    return np.where(p >= density.floor, p, 0.0)


def fisher_matrix(density: Density) -> FisherMatrix:
    """I_ij = E<rho_i, rho_j> for every pair of blocks."""
    b = density.blocks
    if isinstance(density, GaussianDensity):
        I = _block_trace(_precision(density), b)
        return FisherMatrix(I, b, "analytic").check(1e-8 * max(1.0, float(np.abs(I).max())))
    grads = log_gradients(density)
    p = _grid_weights(density)
    I = np.zeros((b.n, b.n))
    for i in range(b.n):
        for j in range(i, b.n):
            integrand = sum(grads[ci] * grads[cj] for ci, cj in zip(b.coords(i), b.coords(j)))
            I[i, j] = I[j, i] = density.integrate(p * integrand)
    if not np.all(np.isfinite(I)):
        raise NonFiniteError("Fisher matrix quadrature overflowed")
    return FisherMatrix(I, b, "quadrature").check(1e-8 * max(1.0, float(np.abs(I).max())))


def fisher_scalar(density: Density) -> float:
    """Total Fisher information E|rho|^2."""
    if isinstance(density, GaussianDensity):
        return float(np.trace(_precision(density)))
    grads = log_gradients(density)
    integrand = _grid_weights(density) * sum(g * g for g in grads)
    return _require_finite(density.integrate(integrand), "Fisher information")


def fisher_of_sum(density: Density) -> float:
    """J = I(X_1 + ... + X_n)."""
    return fisher_scalar(sum_density(density))


def score_projection_residual(density: Density, lam) -> ProjectionResidual:
    """Check that the score of the sum is the conditional mean of block scores."""
    b = density.blocks
    lam = np.asarray(getattr(lam, "values", lam), dtype=float).reshape(-1)
    if lam.shape != (b.n,):
        raise ValueError(f"need {b.n} weights")
    L = np.kron(lam[None, :], np.eye(b.d))

    if isinstance(density, GaussianDensity):
        A = _sum_matrix(b)
        S = density.cov
        P = _precision(density)
        W = A @ S @ A.T
        PW = np.linalg.inv(W)
        J = float(np.trace(PW))
        # rho_W(W) = PW A (X - mu) and rho(X) = P (X - mu).
        B = lam.sum() * PW @ A - L @ P
        residual = float(np.trace(B @ S @ B.T))
        cov_W_rho = PW @ A @ S @ P  # E[rho_W rho^T], d x nd
        cross = np.array([np.trace(cov_W_rho[:, b.coords(j)]) for j in range(b.n)]) - J
        return ProjectionResidual(residual, cross, J)

    grads = [-g for g in log_gradients(density)]
    p = _grid_weights(density)
    f = sum_density(density)
    J = fisher_scalar(f)
    f_grads = np.stack([-g for g in log_gradients(f)], axis=-1)
    interp = RegularGridInterpolator(
        [ax.nodes for ax in f.axes], f_grads, method="linear", bounds_error=False, fill_value=None
    )
    mesh = density.mesh()
    w = np.stack([sum(mesh[i * b.d + c] for i in range(b.n)) for c in range(b.d)], axis=-1)
    rho_w = interp(w.reshape(-1, b.d)).reshape(w.shape)
    resid = np.zeros(p.shape)
    cross = np.zeros(b.n)
    for c in range(b.d):
        block_scores = [grads[i * b.d + c] for i in range(b.n)]
        combo = sum(l * r for l, r in zip(lam, block_scores))
        resid += (lam.sum() * rho_w[..., c] - combo) ** 2
        for j in range(b.n):
            cross[j] += density.integrate(p * rho_w[..., c] * block_scores[j])
    return ProjectionResidual(float(density.integrate(p * resid)), cross - J, J)
