"""Experiment configuration: parsing and validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import ConfigInvalid

VERIFICATION_IDS = (
    "classical_epi",
    "lambda_fisher",
    "optimized_stam",
    "weighted_fisher",
    "dependent_linearized",
    "dependent_epi",
    "conditional_linearized",
    "conditional_epi",
    "conditional_epi_clean",
    "supermodular_epi",
    "rioul_condition",
    "hao_jog",
)
# reported, but never counted as a violation for the exit status
EXPLORATORY_IDS = ("rioul_condition",)
THETA = "theta"


@dataclass(frozen=True)
class FlowConfig:
    T: float = 8.0
    nodes: int = 64
    s0: Optional[float] = None


@dataclass(frozen=True)
class LsmConfig:
    pairs: int = 100_000
    seed: int = 7
    tol: float = 1e-6
    s_values: tuple = (0.1, 0.5, 1.0)


@dataclass(frozen=True)
class SweepConfig:
    param: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    density: dict
    verifications: tuple
    flow: FlowConfig = field(default_factory=FlowConfig)
    lsm: Optional[LsmConfig] = None
    weights: Optional[tuple] = None
    t_list: tuple = (0.5, 1.0, 2.0)
    symmetric: bool = False
    spatial: bool = True
    sweep: Optional[SweepConfig] = None
    out: Optional[str] = None
    seed: int = 7

    def density_at(self, value: float) -> dict:
        """Density spec with the sweep parameter set to ``value``."""
        spec = copy.deepcopy(self.density)
        p = self.sweep.param
        if p == THETA:
            return spec
        if p in spec:
            spec[p] = value
        else:
            spec["params"][p] = value
        return spec


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def parse_config(raw: Any, name: str = "experiment") -> ExperimentConfig:
    """Validate a decoded JSON object; every problem is listed in the error."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("config: top level must be an object")
    errors: list[str] = []

    density = raw.get("density")
    if not isinstance(density, dict):
        errors.append("density: required object")
        density = {}

    ver = raw.get("verifications")
    if not isinstance(ver, list) or not ver:
        errors.append("verifications: required non-empty list")
        ver = []
    for v in ver:
        if v not in VERIFICATION_IDS:
            errors.append(f"verifications: unknown id {v!r}")

    flow = FlowConfig()
    if "flow" in raw:
        f = raw["flow"]
        if not isinstance(f, dict):
            errors.append("flow: must be an object")
        else:
            T, nodes, s0 = f.get("T", 8.0), f.get("nodes", 64), f.get("s0")
            if not (_number(T) and T > 0):
                errors.append("flow.T: must be a positive number")
            if not (_int(nodes) and nodes >= 4):
                errors.append("flow.nodes: must be an integer >= 4")
            if s0 is not None and not (_number(s0) and s0 >= 0):
                errors.append("flow.s0: must be a nonnegative number")
            if not errors:
                flow = FlowConfig(float(T), int(nodes), None if s0 is None else float(s0))

    lsm = None
    if "lsm" in raw:
        l = raw["lsm"]
        if not isinstance(l, dict):
            errors.append("lsm: must be an object")
        else:
            pairs, seed, tol = l.get("pairs", 100_000), l.get("seed", raw.get("seed", 7)), l.get("tol", 1e-6)
            s_values = l.get("s_values", [0.1, 0.5, 1.0])
            if not (_int(pairs) and pairs >= 1):
                errors.append("lsm.pairs: must be a positive integer")
            if not (_int(seed) and seed >= 0):
                errors.append("lsm.seed: must be a nonnegative integer")
            if not (_number(tol) and tol >= 0):
                errors.append("lsm.tol: must be a nonnegative number")
            if not (isinstance(s_values, list) and all(_number(s) and s > 0 for s in s_values)):
                errors.append("lsm.s_values: must be a list of positive numbers")
            else:
                lsm = LsmConfig(pairs, seed, float(tol), tuple(float(s) for s in s_values))

    weights = raw.get("weights")
    if weights is not None:
        if not (isinstance(weights, list) and weights and all(_number(w) for w in weights)):
            errors.append("weights: must be a non-empty list of numbers")
            weights = None
        else:
            weights = tuple(float(w) for w in weights)
            n = density.get("n", 2)
            if _int(n) and len(weights) != n:
                errors.append(f"weights: expected {n} entries, got {len(weights)}")

    t_list = raw.get("t_list", [0.5, 1.0, 2.0])
    if not (isinstance(t_list, list) and t_list and all(_number(t) and t >= 0 for t in t_list)):
        errors.append("t_list: must be a non-empty list of nonnegative numbers")
        t_list = []

    seed = raw.get("seed", 7)
    if not (_int(seed) and seed >= 0):
        errors.append("seed: must be a nonnegative integer")

    for key in ("symmetric", "spatial"):
        if key in raw and not isinstance(raw[key], bool):
            errors.append(f"{key}: must be true or false")

    sweep = None
    if "sweep" in raw:
        sweep, sweep_errors = _parse_sweep(raw["sweep"], density, ver)
        errors.extend(sweep_errors)

    out = raw.get("output", {})
    out_dir = out.get("dir") if isinstance(out, dict) else None
    if out_dir is not None and not isinstance(out_dir, str):
        errors.append("output.dir: must be a string")

    if errors:
        raise ConfigInvalid(errors)
    return ExperimentConfig(
        name=str(raw.get("name", name)),
        density=density,
        verifications=tuple(ver),
        flow=flow,
        lsm=lsm,
        weights=weights,
        t_list=tuple(float(t) for t in t_list),
        symmetric=bool(raw.get("symmetric", False)),
        spatial=bool(raw.get("spatial", True)),
        sweep=sweep,
        out=out_dir,
        seed=int(seed),
    )


def _parse_sweep(s, density: dict, ver: list):
    errors = []
    if not isinstance(s, dict):
        return None, ["sweep: must be an object"]
    param = s.get("param")
    params = density.get("params", {}) if isinstance(density.get("params", {}), dict) else {}
    if not isinstance(param, str):
        errors.append("sweep.param: required string")
    elif param == THETA:
        if density.get("n", 2) != 2:
            errors.append("sweep.param: theta sweeps need n = 2")
        bad = [v for v in ver if v != "lambda_fisher"]
        if bad:
            errors.append(f"sweep.param: theta only drives lambda_fisher, not {bad}")
    elif param not in density and param not in params:
        errors.append(f"sweep.param: {param!r} is not a key of the density spec")
    elif param in ("kind", "expr", "n", "d", "axes", "cov", "mean", "params"):
        errors.append(f"sweep.param: {param!r} is not a numeric parameter")

    values = None
    if "values" in s:
        v = s["values"]
        if not (isinstance(v, list) and all(_number(x) for x in v)):
            errors.append("sweep.values: must be a list of numbers")
        elif not v:
            errors.append("sweep.values: empty sweep range")
        else:
            values = tuple(float(x) for x in v)
    else:
        rng, steps = s.get("range"), s.get("steps")
        if not (isinstance(rng, list) and len(rng) == 2 and all(_number(x) for x in rng)):
            errors.append("sweep.range: must be [start, stop]")
        if not _int(steps):
            errors.append("sweep.steps: must be an integer")
        elif steps < 1:
            errors.append("sweep.steps: empty sweep range")
        if not errors:
            if steps > 1 and rng[0] == rng[1]:
                errors.append("sweep.range: empty sweep range")
            else:
                values = tuple(float(x) for x in np.linspace(rng[0], rng[1], steps))
    if errors:
        return None, errors
    return SweepConfig(param, values), []


def resolve_config_path(path: str) -> Path:
    """A filesystem path, or the name of a bundled config."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    bundled = resources.files("epilab") / "configs" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigInvalid(f"config: no such file {path!r}")


def load_config(path: str) -> ExperimentConfig:
    p = resolve_config_path(path)
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config: invalid JSON ({exc})") from exc
    return parse_config(raw, name=p.stem)


def bundled_configs() -> list[str]:
    root = resources.files("epilab") / "configs"
    return sorted(f.name for f in root.iterdir() if f.name.endswith(".json"))
