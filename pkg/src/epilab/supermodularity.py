"""Log-supermodularity (MTP2) certificates.

A density u is log-supermodular when u(x) u(y) <= u(x ^ y) u(x v y) for the
componentwise minimum and maximum.  Three certificates are offered: a lattice
test on grid point pairs, the sign of finite-difference mixed partials of
log u, and the precision-matrix criterion for Gaussians.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .density import Density, GaussianDensity, GridDensity, convolve_isotropic_gaussian
from .errors import CoreTooSmallError, PreconditionError
from .functionals import central_difference

LSM_TOL = 1e-6
GAUSSIAN_TOL = 1e-10
EXHAUSTIVE_MAX_POINTS = 4096
CORE_REL = 1e-8
CORE_MIN_FRACTION = 0.25
_CHUNK = 1 << 20


@dataclass(frozen=True)
class LsmReport:
    """Outcome of one certificate.

    ``worst_violation`` is the smallest margin seen (negative means a
    violation) and ``witness`` the point pair or coordinate pair achieving it.
    """

    method: str
    verdict: str
    worst_violation: float
    witness: Optional[tuple] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("holds", "fails", "inconclusive"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "fails" and self.witness is None:
            raise ValueError("a failing certificate needs a witness")

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        witness = self.witness
        if witness is not None:
            witness = [np.asarray(w).tolist() for w in witness]
        return {
            "method": self.method,
            "verdict": self.verdict,
            "worst_violation": float(self.worst_violation),
            "witness": witness,
            **self.extra,
        }


def _verdict(worst: float, tol: float) -> str:
    return "holds" if worst >= -tol else "fails"


def lattice_check(
    density: GridDensity, pairs: int = 100_000, seed: int = 7, tol: float = LSM_TOL
) -> LsmReport:
    """Lattice inequality on grid point pairs, in log form."""
    if not isinstance(density, GridDensity):
        raise TypeError("lattice_check needs a grid density")
    if pairs < 1:
        raise ValueError("pairs must be positive")
    p = np.asarray(density.values)
    L = density.log_values().reshape(-1)
    valid = (p >= density.floor).reshape(-1)
    shape = p.shape
    npts = L.size
    rng = np.random.Generator(np.random.Philox(seed))

    def batches():
        i = rng.integers(0, npts, size=pairs)
        j = rng.integers(0, npts, size=pairs)
        yield i, j
        if npts <= EXHAUSTIVE_MAX_POINTS:
            iu, ju = np.triu_indices(npts, k=1)
            for start in range(0, iu.size, _CHUNK):
                yield iu[start : start + _CHUNK], ju[start : start + _CHUNK]

    worst, witness, counted = np.inf, None, 0
    for i, j in batches():
        keep = valid[i] & valid[j]
        i, j = i[keep], j[keep]
        if i.size == 0:
            continue
        xi = np.array(np.unravel_index(i, shape))
        xj = np.array(np.unravel_index(j, shape))
        meet = np.ravel_multi_index(np.minimum(xi, xj), shape)
        join = np.ravel_multi_index(np.maximum(xi, xj), shape)
        margin = L[meet] + L[join] - L[i] - L[j]
        k = int(np.argmin(margin))
        counted += i.size
        if margin[k] < worst:
            worst = float(margin[k])
            nodes = [ax.nodes for ax in density.axes]
            witness = (
                np.array([nodes[c][xi[c, k]] for c in range(len(shape))]),
                np.array([nodes[c][xj[c, k]] for c in range(len(shape))]),
            )
    extra = {"pairs": counted, "exhaustive": npts <= EXHAUSTIVE_MAX_POINTS}
    if counted == 0:
        return LsmReport("lattice", "inconclusive", 0.0, None, extra)
    return LsmReport("lattice", _verdict(worst, tol), worst, witness, extra)


def core_region(density: GridDensity) -> tuple:
    """Index slices of the smallest box containing {p >= 1e-8 max p}."""
    p = np.asarray(density.values)
    idx = np.nonzero(p >= CORE_REL * p.max())
    return tuple(slice(int(k.min()), int(k.max()) + 1) for k in idx)


def mixed_partials_check(density: GridDensity, tol: float = LSM_TOL) -> LsmReport:
    """Minimum over the core box of every mixed partial of log p."""
    if not isinstance(density, GridDensity):
        raise TypeError("mixed_partials_check needs a grid density")
    p = np.asarray(density.values)
    frac = float(np.mean(p > density.floor))
    if frac < CORE_MIN_FRACTION:
        raise CoreTooSmallError(f"only {frac:.1%} of the grid lies above the floor")
    core = core_region(density)
    # keep away from the two boundary layers where stencils drop to second order
    core = tuple(
        slice(max(sl.start, 2), min(sl.stop, ax.m - 2)) for sl, ax in zip(core, density.axes)
    )
    extra = {"core": [[density.axes[k].nodes[sl.start], density.axes[k].nodes[sl.stop - 1]] for k, sl in enumerate(core)]}
    k_total = p.ndim
    if k_total < 2:
        return LsmReport("mixed_partials", "holds", 0.0, None, extra)
    L = density.log_values()
    h = density.spacings
    first = [central_difference(L, h[k], k) for k in range(k_total)]
    worst, witness = np.inf, None
    for a, b in itertools.combinations(range(k_total), 2):
        mixed = central_difference(first[a], h[b], b)[core]
        idx = np.unravel_index(int(np.argmin(mixed)), mixed.shape)
        if mixed[idx] < worst:
            worst = float(mixed[idx])
            point = np.array([density.axes[c].nodes[core[c].start + idx[c]] for c in range(k_total)])
            witness = ((a, b), point)
    extra["min_mixed_partial"] = worst
    return LsmReport("mixed_partials", _verdict(worst, tol), worst, witness, extra)


def gaussian_lsm_check(g: GaussianDensity, tol: float = GAUSSIAN_TOL) -> LsmReport:
    """Off-diagonal entries of the precision matrix must be nonpositive."""
    P = g.precision
    k = P.shape[0]
    if k == 1:
        return LsmReport("gaussian_inverse", "holds", 0.0, None, {"max_offdiag": 0.0})
    off = P.copy()
    np.fill_diagonal(off, -np.inf)
    i, j = np.unravel_index(int(np.argmax(off)), off.shape)
    worst = -float(off[i, j])
    return LsmReport(
        "gaussian_inverse", _verdict(worst, tol), worst, (int(i), int(j)), {"max_offdiag": float(off[i, j])}
    )


def certify(density: Density, tol: Optional[float] = None, **lattice_kwargs) -> LsmReport:
    """Default certificate for a backend: precision criterion or mixed partials."""
    if isinstance(density, GaussianDensity):
        return gaussian_lsm_check(density, GAUSSIAN_TOL if tol is None else tol)
    return mixed_partials_check(density, LSM_TOL if tol is None else tol)


def class_C_check(density: Density, s_values: Sequence[float] = (0.1, 0.5, 1.0), tol: Optional[float] = None) -> list:
    """Certificates for p * g_s at each ``s``; ``p`` itself must be LSM."""
    base = certify(density, tol)
    if not base.holds:
        raise PreconditionError(f"density is not log-supermodular at s=0 (worst {base.worst_violation:.3g})")
    out = []
    for s in s_values:
        rep = certify(convolve_isotropic_gaussian(density, float(s)), tol)
        out.append(LsmReport(rep.method, rep.verdict, rep.worst_violation, rep.witness, {**rep.extra, "s": float(s)}))
    return out
