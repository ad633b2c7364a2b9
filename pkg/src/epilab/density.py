"""Block-structured joint densities on (R^d)^n.

Two backends are provided:

* :class:`GaussianDensity` -- closed form, described by a mean vector and a
  covariance matrix.
* :class:`GridDensity` -- values sampled on a uniform tensor grid.  Every
  integral is a trapezoid rule, and the density between nodes is taken to be
  the piecewise (multi)linear interpolant of the samples.

All densities are immutable.  The operations in this module dispatch on the
backend and return new densities.  Block indices are 0-based.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .errors import (
    AllZeroError,
    DomainTooSmallError,
    DomainTooSmallWarning,
    EmptyKeepError,
    NonFiniteError,
    NonPositiveLambdaError,
    NonPositiveSError,
    SingularCovarianceError,
    UnsupportedError,
)

GRID_MAX_TOTAL = 4
GRID_MIN_POINTS = 8
DEFAULT_FLOOR = 1e-300
SPD_TOL = 1e-10
# Domain padding, in kernel standard deviations, for Gaussian smoothing.
PAD_SIGMAS = 6.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BlockStructure:
    """``n`` random-vector blocks, each of dimension ``d``."""

    n: int
    d: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.d) != self.d or self.n < 1 or self.d < 1:
            raise ValueError(f"block structure needs positive integers, got n={self.n}, d={self.d}")

    @property
    def total(self) -> int:
        return self.n * self.d

    def coords(self, i: int) -> list[int]:
        """Coordinate indices belonging to block ``i``."""
        return list(range(i * self.d, (i + 1) * self.d))

    def coords_of(self, blocks: Iterable[int]) -> list[int]:
        return [c for i in blocks for c in self.coords(i)]


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianDensity:
    mean: np.ndarray
    cov: np.ndarray
    blocks: BlockStructure

    def __post_init__(self):
        mean = _readonly(self.mean).reshape(-1)
        cov = _readonly(np.atleast_2d(self.cov))
        k = self.blocks.total
        if mean.shape != (k,) or cov.shape != (k, k):
            raise ValueError(f"mean/cov shapes {mean.shape}/{cov.shape} do not match n*d={k}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise NonFiniteError("Gaussian parameters must be finite")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance matrix is not symmetric")
        sym = (cov + cov.T) / 2
        sym.setflags(write=False)
        if np.linalg.eigvalsh(sym)[0] <= SPD_TOL:
            raise SingularCovarianceError("covariance matrix is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", sym)

    @classmethod
    def from_cov(cls, cov, n: int | None = None, d: int = 1, mean=None) -> "GaussianDensity":
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        k = cov.shape[0]
        if n is None:
            n = k // d
        if mean is None:
            mean = np.zeros(k)
        return cls(mean, cov, BlockStructure(n, d))

    @classmethod
    def equicorrelated(cls, r: float, n: int = 2, d: int = 1, var: float = 1.0) -> "GaussianDensity":
        """Blocks with unit-variance coordinates, coordinate ``k`` of every
        block correlated with coordinate ``k`` of every other block by ``r``."""
        cov = var * np.kron((1 - r) * np.eye(n) + r * np.ones((n, n)), np.eye(d))
        return cls(np.zeros(n * d), cov, BlockStructure(n, d))

    @property
    def precision(self) -> np.ndarray:
        try:
            chol = np.linalg.cholesky(self.cov)
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError(str(exc)) from exc
        inv_chol = np.linalg.inv(chol)
        prec = inv_chol.T @ inv_chol
        return (prec + prec.T) / 2

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - self.mean
        sign, logdet = np.linalg.slogdet(self.cov)
        quad = np.einsum("...i,ij,...j->...", diff, self.precision, diff)
        return -0.5 * (quad + logdet + self.blocks.total * math.log(2 * math.pi))

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))


@dataclass(frozen=True)
class GridAxis:
    """Uniform grid ``linspace(lo, hi, m)`` for one coordinate."""

    lo: float
    hi: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.hi <= self.lo:
            raise ValueError(f"grid axis needs finite lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.m) != self.m or self.m < GRID_MIN_POINTS:
            raise ValueError(f"grid axis needs at least {GRID_MIN_POINTS} points, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.m)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.m - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.m, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        return w

    def scaled(self, factor: float) -> "GridAxis":
        return GridAxis(self.lo * factor, self.hi * factor, self.m)


@dataclass(frozen=True)
class GridDensity:
    """Samples of a density on a tensor grid.

    Axis ``k`` of ``values`` is coordinate ``k`` in block-major order: block
    ``i`` owns axes ``i*d .. i*d + d - 1``.  ``smooth=False`` marks densities
    that are not differentiable (for instance a uniform law); flows then start
    slightly after time 0.
    """

    axes: tuple
    values: np.ndarray
    blocks: BlockStructure
    floor: float = DEFAULT_FLOOR
    smooth: bool = True

    def __post_init__(self):
        axes = tuple(self.axes)
        values = _readonly(self.values)
        if self.blocks.total > GRID_MAX_TOTAL:
            raise UnsupportedError(
                f"grid backend supports n*d <= {GRID_MAX_TOTAL}, got {self.blocks.total}"
            )
        if len(axes) != self.blocks.total:
            raise ValueError("one grid axis per coordinate is required")
        if values.shape != tuple(ax.m for ax in axes):
            raise ValueError(f"values shape {values.shape} does not match axes")
        if not np.all(np.isfinite(values)):
            raise NonFiniteError("grid values must be finite")
        if np.any(values < 0):
            raise ValueError("grid values must be nonnegative")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def spacings(self) -> list[float]:
        return [ax.spacing for ax in self.axes]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij")

    def integrate(self, f: np.ndarray | None = None) -> float:
        """Trapezoid integral of ``f`` (default: the density itself)."""
        return trapezoid(self.values if f is None else f, self.axes)

    def log_values(self) -> np.ndarray:
        return np.log(np.maximum(self.values, self.floor))

    def coarsen(self) -> "GridDensity":
        """Keep every other node along each axis (same domain when ``m`` is odd)."""
        axes = []
        for ax in self.axes:
            m = (ax.m + 1) // 2
            axes.append(GridAxis(ax.lo, ax.lo + 2 * ax.spacing * (m - 1), m))
        sl = tuple(slice(None, None, 2) for _ in self.axes)
        return normalize(replace(self, axes=tuple(axes), values=self.values[sl]))

    def refine(self) -> "GridDensity":
        """Insert midpoints by multilinear interpolation (``m -> 2m - 1``)."""
        values = np.asarray(self.values)
        for k in range(values.ndim):
            values = np.moveaxis(values, k, 0)
            out = np.empty((2 * values.shape[0] - 1,) + values.shape[1:])
            out[::2] = values
            out[1::2] = (values[:-1] + values[1:]) / 2
            values = np.moveaxis(out, 0, k)
        axes = tuple(GridAxis(ax.lo, ax.hi, 2 * ax.m - 1) for ax in self.axes)
        return normalize(replace(self, axes=axes, values=values))


Density = Union[GaussianDensity, GridDensity]


@dataclass(frozen=True)
class Weights:
    """Positive block weights.

    With ``normalized=True`` the weights lie in (0, 1) and sum of squares is
    1 within 1e-12.  A single block has the only admissible weight 1.
    """

    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = _readonly(self.values).reshape(-1)
        v.setflags(write=False)
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise NonPositiveLambdaError(f"weights must be finite and positive, got {v}")
        if self.normalized:
            if abs(float(np.sum(v * v)) - 1.0) > 1e-12:
                raise ValueError(f"normalized weights need sum of squares 1, got {np.sum(v * v)!r}")
            if v.size > 1 and np.any(v >= 1):
                raise ValueError("normalized weights must lie in (0, 1)")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @classmethod
    def equal(cls, n: int) -> "Weights":
        return cls(np.full(n, 1.0 / math.sqrt(n)))

    @classmethod
    def from_powers(cls, powers) -> "Weights":
        """lambda_i^2 proportional to ``powers[i]`` (entropy powers, say)."""
        powers = np.asarray(powers, dtype=float)
        lam = np.sqrt(powers / powers.sum())
        return cls(lam / math.sqrt(float(np.sum(lam * lam))))

    @classmethod
    def normalize(cls, values) -> "Weights":
        v = np.asarray(values, dtype=float)
        return cls(v / np.linalg.norm(v))


def trapezoid(values: np.ndarray, axes: Sequence[GridAxis]) -> float:
    out = np.asarray(values, dtype=float)
    for ax in reversed(axes):
        out = out @ ax.weights
    return float(out)


def _integrate_axes(values: np.ndarray, axes: Sequence[GridAxis], drop: Sequence[int]) -> np.ndarray:
    out = np.asarray(values, dtype=float)
    for k in sorted(drop, reverse=True):
        out = np.tensordot(out, axes[k].weights, axes=([k], [0]))
    return out


def make_axes(spec, total: int) -> tuple:
    """Build per-coordinate axes from a GridAxis, a (lo, hi, m) triple, a dict,
    or a sequence of any of these (one per coordinate)."""

    def one(s):
        if isinstance(s, GridAxis):
            return s
        if isinstance(s, dict):
            return GridAxis(s["lo"], s["hi"], s["m"])
        lo, hi, m = s
        return GridAxis(lo, hi, m)

    if isinstance(spec, (GridAxis, dict)) or (
        isinstance(spec, (tuple, list)) and len(spec) == 3 and np.isscalar(spec[0])
    ):
        return (one(spec),) * total
    axes = tuple(one(s) for s in spec)
    if len(axes) != total:
        raise ValueError(f"expected {total} axes, got {len(axes)}")
    return axes


def grid_from_function(fn, axes, blocks: BlockStructure, smooth: bool = True, log: bool = False) -> GridDensity:
    """Sample ``fn`` (or ``exp(fn)`` when ``log``) on the mesh and normalize."""
    axes = make_axes(axes, blocks.total)
    mesh = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    vals = np.asarray(fn(*mesh), dtype=float)
    if log:
        vals = np.exp(vals - vals.max())
    vals = np.broadcast_to(vals, mesh[0].shape)
    return normalize(GridDensity(axes, vals, blocks, smooth=smooth))


# ---------------------------------------------------------------------------
# operations


def normalize(density: GridDensity) -> GridDensity:
    """Rescale grid values to unit trapezoid mass."""
    if not np.all(np.isfinite(density.values)):
        raise NonFiniteError("cannot normalize non-finite values")
    mass = density.integrate()
    if not math.isfinite(mass):
        raise NonFiniteError("total mass overflowed")
    if mass <= 0:
        raise AllZeroError("density has zero total mass")
    return replace(density, values=density.values / mass)


def gaussian_to_grid(g: GaussianDensity, axes) -> GridDensity:
    """Sample a Gaussian on a tensor grid.

    Raises :class:`DomainTooSmallError` when some coordinate is covered by
    fewer than 6 standard deviations on either side of its mean; warns between
    6 and 8.
    """
    axes = make_axes(axes, g.blocks.total)
    sd = np.sqrt(np.diag(g.cov))
    coverage = min(
        min(mu - ax.lo, ax.hi - mu) / s for mu, s, ax in zip(g.mean, sd, axes)
    )
    if coverage < 6.0:
        raise DomainTooSmallError(f"grid covers only {coverage:.2f} standard deviations")
    if coverage < 8.0:
        warnings.warn(
            f"grid covers {coverage:.2f} standard deviations; 8 recommended",
            DomainTooSmallWarning,
            stacklevel=2,
        )
    mesh = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    vals = g.pdf(np.stack(mesh, axis=-1))
    return normalize(GridDensity(axes, vals, g.blocks))


def _check_keep(keep, n: int) -> list[int]:
    keep = sorted(set(int(i) for i in keep))
    if not keep:
        raise EmptyKeepError("marginalize needs at least one block to keep")
    if keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"block index out of range for n={n}: {keep}")
    return keep


def marginalize(density: Density, keep: Iterable[int]) -> Density:
    """Marginal law of the blocks listed in ``keep``."""
    b = density.blocks
    keep = _check_keep(keep, b.n)
    coords = b.coords_of(keep)
    blocks = BlockStructure(len(keep), b.d)
    if isinstance(density, GaussianDensity):
        idx = np.ix_(coords, coords)
        return GaussianDensity(density.mean[coords], density.cov[idx], blocks)
    if len(keep) == b.n:
        return density
    drop = [k for k in range(b.total) if k not in coords]
    vals = _integrate_axes(density.values, density.axes, drop)
    axes = tuple(density.axes[k] for k in coords)
    return normalize(replace(density, axes=axes, values=np.maximum(vals, 0.0), blocks=blocks))


def product(*densities: Density) -> Density:
    """Joint law of independent blocks (all factors must share ``d``)."""
    if len(densities) == 1 and isinstance(densities[0], (list, tuple)):
        densities = tuple(densities[0])
    d = densities[0].blocks.d
    if any(p.blocks.d != d for p in densities):
        raise ValueError("all factors must have the same block dimension")
    n = sum(p.blocks.n for p in densities)
    blocks = BlockStructure(n, d)
    if all(isinstance(p, GaussianDensity) for p in densities):
        from scipy.linalg import block_diag

        mean = np.concatenate([p.mean for p in densities])
        return GaussianDensity(mean, block_diag(*[p.cov for p in densities]), blocks)
    if not all(isinstance(p, GridDensity) for p in densities):
        raise UnsupportedError("cannot mix Gaussian and grid factors")
    vals = densities[0].values
    for p in densities[1:]:
        vals = np.multiply.outer(vals, p.values)
    axes = sum((p.axes for p in densities), ())
    smooth = all(p.smooth for p in densities)
    return normalize(GridDensity(axes, vals, blocks, floor=densities[0].floor, smooth=smooth))


def permute_blocks(density: Density, perm: Sequence[int]) -> Density:
    """Relabel blocks: new block ``k`` is old block ``perm[k]``."""
    b = density.blocks
    if sorted(perm) != list(range(b.n)):
        raise ValueError(f"not a permutation of range({b.n}): {perm}")
    coords = b.coords_of(perm)
    if isinstance(density, GaussianDensity):
        return GaussianDensity(density.mean[coords], density.cov[np.ix_(coords, coords)], b)
    return replace(
        density,
        axes=tuple(density.axes[k] for k in coords),
        values=np.transpose(density.values, coords),
    )


def _sum_matrix(blocks: BlockStructure) -> np.ndarray:
    return np.kron(np.ones((1, blocks.n)), np.eye(blocks.d))


def _shear_sum(values: np.ndarray, axes: list, a: int, b: int):
    """Density of x_a + x_b: integrate along the fibres x_a + x_b = w.

    Axis ``a`` is replaced by the new sum axis and axis ``b`` is removed.  The
    integrand is read off axis ``b`` by linear interpolation.
    """
    ax_a, ax_b = axes[a], axes[b]
    h = min(ax_a.spacing, ax_b.spacing)
    lo, hi = ax_a.lo + ax_b.lo, ax_a.hi + ax_b.hi
    m = int(round((hi - lo) / h)) + 1
    ax_w = GridAxis(lo, hi, m)
    w = ax_w.nodes

    v = np.moveaxis(values, [a, b], [-2, -1])
    rest = v.shape[:-2]
    v = v.reshape(-1, ax_a.m, ax_b.m)
    out = np.zeros((v.shape[0], m))
    xa, wa = ax_a.nodes, ax_a.weights
    for i in range(ax_a.m):
        pos = (w - xa[i] - ax_b.lo) / ax_b.spacing
        valid = (pos > -1e-9) & (pos < ax_b.m - 1 + 1e-9)
        pos = np.clip(pos, 0.0, ax_b.m - 1)
        j0 = np.minimum(np.floor(pos).astype(int), ax_b.m - 2)
        frac = pos - j0
        row = v[:, i, :]
        val = row[:, j0] * (1 - frac) + row[:, j0 + 1] * frac
        out += wa[i] * np.where(valid, val, 0.0)
    out = out.reshape(rest + (m,))
    keep_axes = [ax for k, ax in enumerate(axes) if k not in (a, b)]
    # ``a < b``: the sum axis returns to position ``a``.
    out = np.moveaxis(out, -1, a)
    keep_axes.insert(a, ax_w)
    return out, keep_axes


def sum_density(density: Density) -> Density:
    """Law of W = X_1 + ... + X_n, a d-dimensional density."""
    b = density.blocks
    blocks = BlockStructure(1, b.d)
    if isinstance(density, GaussianDensity):
        A = _sum_matrix(b)
        return GaussianDensity(A @ density.mean, A @ density.cov @ A.T, blocks)
    if b.total > GRID_MAX_TOTAL:
        raise UnsupportedError("grid sum needs n*d <= 4")
    if b.n == 1:
        return density
    values, axes = np.asarray(density.values), list(density.axes)
    for _ in range(b.n - 1):
        for c in range(b.d):
            values, axes = _shear_sum(values, axes, c, b.d)
    return normalize(replace(density, axes=tuple(axes), values=np.maximum(values, 0.0), blocks=blocks))


def _check_lambda(lam, n: int) -> np.ndarray:
    lam = np.asarray(getattr(lam, "values", lam), dtype=float).reshape(-1)
    if lam.shape != (n,):
        raise ValueError(f"need {n} weights, got {lam.shape[0]}")
    if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
        raise NonPositiveLambdaError(f"weights must be positive, got {lam}")
    return lam


def scale_blocks(density: Density, lam, mode: str = "divide") -> Density:
    """Law of (X_1/l_1, ..., X_n/l_n) (``divide``) or (l_1 X_1, ...) (``multiply``)."""
    b = density.blocks
    lam = _check_lambda(lam, b.n)
    if mode == "divide":
        factor = 1.0 / lam
    elif mode == "multiply":
        factor = lam
    else:
        raise ValueError(f"mode must be 'divide' or 'multiply', got {mode!r}")
    per_coord = np.repeat(factor, b.d)
    if isinstance(density, GaussianDensity):
        return GaussianDensity(per_coord * density.mean, np.outer(per_coord, per_coord) * density.cov, b)
    axes = tuple(ax.scaled(f) for ax, f in zip(density.axes, per_coord))
    jac = float(np.prod(per_coord))
    return replace(density, axes=axes, values=density.values / jac)


# ---------------------------------------------------------------------------
# Gaussian smoothing of a piecewise-linear grid density


def _ramp_correction(z: np.ndarray, sigma: float) -> np.ndarray:
    """(ramp * g_sigma)(z) - ramp(z), written in a cancellation-free form."""
    u = np.abs(z) / sigma
    return sigma * (np.exp(-0.5 * u * u) / _SQRT_2PI - u * ndtr(-u))


def _step_correction(z: np.ndarray, sigma: float) -> np.ndarray:
    """Phi(z/sigma) - step(z), with step(0) = 1/2."""
    return -np.sign(z) * ndtr(-np.abs(z) / sigma)


def smoothing_matrix(axis: GridAxis, x_out: np.ndarray, a: float, sigma: float) -> np.ndarray:
    """Matrix K with (K @ f)(x) = integral of f_hat(y) g_sigma(x - a y) dy.

    ``f_hat`` is the piecewise-linear interpolant of the samples ``f`` on
    ``axis`` (zero outside it) and ``g_sigma`` the centred normal density.  The
    integral is evaluated in closed form for every hat function, so the result
    is exact for ``f_hat`` at any ``sigma >= 0``.
    """
    c = a * axis.nodes
    w = a * axis.spacing
    z = x_out[:, None] - c[None, :]
    if sigma == 0.0:
        tri = np.maximum(0.0, 1.0 - np.abs(z) / w)
        tri[:, 0] = np.where((z[:, 0] >= 0) & (z[:, 0] <= w), 1 - z[:, 0] / w, 0.0)
        tri[:, -1] = np.where((z[:, -1] <= 0) & (z[:, -1] >= -w), 1 + z[:, -1] / w, 0.0)
        return tri / a

    if w < 1e-2 * sigma:
        # Narrow hats: Taylor expansion of triangle * Gaussian to O(w^4).
        v = z / sigma
        g = np.exp(-0.5 * v * v) / (_SQRT_2PI * sigma)
        K = w * g * (1.0 + w * w * (v * v - 1.0) / (12.0 * sigma * sigma))
    else:
        G = lambda t: _ramp_correction(t, sigma)  # noqa: E731
        K = np.maximum(0.0, 1.0 - np.abs(z) / w) + (G(z + w) - 2 * G(z) + G(z - w)) / w
    z0, z1 = z[:, 0], z[:, -1]
    right_half = np.where((z0 > 0) & (z0 <= w), 1 - z0 / w, np.where(z0 == 0, 0.5, 0.0))
    K[:, 0] = (
        right_half
        + _step_correction(z0, sigma)
        - (_ramp_correction(z0, sigma) - _ramp_correction(z0 - w, sigma)) / w
    )
    left_half = np.where((z1 < 0) & (z1 >= -w), 1 + z1 / w, np.where(z1 == 0, 0.5, 0.0))
    K[:, -1] = (
        left_half
        - _step_correction(z1, sigma)
        + (_ramp_correction(z1 + w, sigma) - _ramp_correction(z1, sigma)) / w
    )
    return K / a


def smooth_grid(density: GridDensity, a: float, sigma: float, out_axes: Sequence[GridAxis]) -> GridDensity:
    """Density of a*X + sigma*Z (Z standard normal) sampled on ``out_axes``.

    For smooth densities the samples stand for the trapezoid measure, whose
    linear interpolant carries an extra variance (a*h)^2/6 per axis; that
    amount is taken out of the kernel so the result is accurate to O(h^4).
    Non-smooth densities (jumps) are smoothed as their linear interpolant.
    """
    vals = np.asarray(density.values)
    for k, (ax, out) in enumerate(zip(density.axes, out_axes)):
        sig = sigma
        if density.smooth:
            sig = math.sqrt(max(sigma * sigma - (a * ax.spacing) ** 2 / 6.0, 0.0))
        K = smoothing_matrix(ax, out.nodes, a, sig)
        vals = np.moveaxis(np.tensordot(K, vals, axes=([1], [k])), 0, k)
    vals = np.maximum(vals, 0.0)
    smooth = density.smooth or sigma > 0
    return normalize(replace(density, axes=tuple(out_axes), values=vals, smooth=smooth))


def convolve_isotropic_gaussian(density: Density, s: float) -> Density:
    """Convolve with the centred normal density of covariance ``s * I``."""
    if not s > 0:
        raise NonPositiveSError(f"convolution variance must be positive, got {s}")
    if isinstance(density, GaussianDensity):
        return replace(density, cov=density.cov + s * np.eye(density.blocks.total))
    sigma = math.sqrt(s)
    out_axes = []
    for ax in density.axes:
        q = int(math.ceil(PAD_SIGMAS * sigma / ax.spacing))
        out_axes.append(GridAxis(ax.lo - q * ax.spacing, ax.hi + q * ax.spacing, ax.m + 2 * q))
    return smooth_grid(density, 1.0, sigma, out_axes)


# ---------------------------------------------------------------------------
# description


def describe(density: Density) -> dict:
    """JSON-serializable summary of a density, with a short content digest."""
    b = density.blocks
    if isinstance(density, GaussianDensity):
        desc = {
            "kind": "gaussian",
            "n": b.n,
            "d": b.d,
            "mean": density.mean.tolist(),
            "cov": density.cov.tolist(),
        }
        payload = json.dumps(desc, sort_keys=True).encode()
    else:
        desc = {
            "kind": "grid",
            "n": b.n,
            "d": b.d,
            "axes": [[ax.lo, ax.hi, ax.m] for ax in density.axes],
        }
        payload = json.dumps(desc, sort_keys=True).encode() + np.ascontiguousarray(density.values).tobytes()
    desc["digest"] = hashlib.sha256(payload).hexdigest()[:16]
    return desc
