"""Built-in densities and the density-spec parser used by configs."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .density import BlockStructure, GaussianDensity, GridDensity, gaussian_to_grid, grid_from_function, make_axes
from .errors import ConfigInvalid

DEFAULT_GAUSSIAN_AXES = (-8.0, 8.0, 129)
DEFAULT_QUARTIC_AXES = (-3.0, 3.0, 129)


def correlated_gaussian(r: float = 0.5, var: float = 1.0, n: int = 2, d: int = 1, axes=DEFAULT_GAUSSIAN_AXES) -> GridDensity:
    """Grid samples of the equicorrelated Gaussian."""
    return gaussian_to_grid(GaussianDensity.equicorrelated(r, n=n, d=d, var=var), axes)


def quartic_coupling(c: float = 0.5, n: int = 2, d: int = 1, axes=DEFAULT_QUARTIC_AXES) -> GridDensity:
    """Density proportional to exp(-sum x_k^4 + c * sum_{k<l} x_k x_l)."""

    def logp(*xs):
        out = -sum(x**4 for x in xs)
        for a in range(len(xs)):
            for b in range(a + 1, len(xs)):
                out = out + c * xs[a] * xs[b]
        return out

    return grid_from_function(logp, axes, BlockStructure(n, d), log=True)


def uniform_box(lo: float = 0.0, hi: float = 1.0, n: int = 2, d: int = 1, m: int = 129) -> GridDensity:
    """Uniform law on [lo, hi]^(n d); marked non-smooth."""
    return grid_from_function(lambda *xs: np.ones_like(xs[0]), (lo, hi, m), BlockStructure(n, d), smooth=False)


# name -> (builder, parameter names, description)
GRID_CATALOG: dict[str, tuple[Callable, tuple, str]] = {
    "correlated_gaussian": (correlated_gaussian, ("r", "var"), "equicorrelated Gaussian sampled on a grid"),
    "quartic_coupling": (quartic_coupling, ("c",), "exp(-sum x^4 + c sum_{k<l} x_k x_l)"),
    "uniform_box": (uniform_box, ("lo", "hi", "m"), "uniform law on a cube (non-smooth)"),
}


def _axes_arg(axes, total):
    if axes is None:
        return None
    if isinstance(axes, dict) and "per_coordinate" in axes:
        return make_axes(axes["per_coordinate"], total)
    return make_axes(axes, total)


def build_density(spec: dict):
    """Build a density from a config mapping.

    Gaussian specs give ``mean``/``cov`` (or ``r``/``var`` for the
    equicorrelated family) with ``n`` and ``d``.  Grid specs name a catalog
    ``expr`` with optional ``params`` and ``axes``.
    """
    if not isinstance(spec, dict):
        raise ConfigInvalid("density: must be an object")
    kind = spec.get("kind")
    n = spec.get("n", 2)
    d = spec.get("d", 1)
    errors = []
    if not (isinstance(n, int) and n >= 1):
        errors.append("density.n: must be a positive integer")
    if not (isinstance(d, int) and d >= 1):
        errors.append("density.d: must be a positive integer")
    if kind == "gaussian":
        if errors:
            raise ConfigInvalid(errors)
        try:
            if "cov" in spec:
                cov = np.asarray(spec["cov"], dtype=float)
                mean = spec.get("mean")
                return GaussianDensity.from_cov(cov, n=n, d=d, mean=None if mean is None else np.asarray(mean, float))
            return GaussianDensity.equicorrelated(float(spec.get("r", 0.0)), n=n, d=d, var=float(spec.get("var", 1.0)))
        except (ValueError, TypeError) as exc:
            raise ConfigInvalid(f"density: {exc}") from exc
    if kind == "grid":
        expr = spec.get("expr")
        if expr not in GRID_CATALOG:
            errors.append(f"density.expr: unknown catalog entry {expr!r}; known: {sorted(GRID_CATALOG)}")
        params = spec.get("params", {})
        if not isinstance(params, dict):
            errors.append("density.params: must be an object")
        if errors:
            raise ConfigInvalid(errors)
        builder, names, _ = GRID_CATALOG[expr]
        unknown = sorted(set(params) - set(names))
        if unknown:
            raise ConfigInvalid([f"density.params.{k}: not a parameter of {expr}" for k in unknown])
        kwargs = dict(params, n=n, d=d)
        try:
            if "axes" in spec and expr != "uniform_box":
                kwargs["axes"] = _axes_arg(spec["axes"], n * d)
            return builder(**kwargs)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigInvalid(f"density: {exc}") from exc
    errors.append(f"density.kind: must be 'gaussian' or 'grid', got {kind!r}")
    raise ConfigInvalid(errors)
