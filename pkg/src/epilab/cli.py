"""Command-line front end: ``epilab run``, ``epilab sweep`` and ``epilab catalog``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import harness as H
from .catalog import GRID_CATALOG, build_density
from .config import (
    EXPLORATORY_IDS,
    THETA,
    VERIFICATION_IDS,
    ExperimentConfig,
    bundled_configs,
    load_config,
)
from .density import GaussianDensity, GridDensity, Weights
from .errors import ConfigInvalid, EpilabError
from .supermodularity import class_C_check, gaussian_lsm_check, lattice_check, mixed_partials_check

log = logging.getLogger("epilab")

CSV_COLUMNS = ("id", "param", "lhs", "rhs", "margin", "budget", "verdict")
EXIT_OK, EXIT_VIOLATED, EXIT_FAILURE = 0, 1, 2


def thread_count() -> int:
    raw = os.environ.get("EPILAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring EPILAB_THREADS=%r", raw)
    return max(1, min(4, os.cpu_count() or 1))


def parallel_map(fn: Callable, items: list) -> list:
    """Map in a thread pool, results in input order."""
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# verification dispatch


def _weights(cfg: ExperimentConfig, n: int, normalized: bool):
    if cfg.weights is None:
        return Weights.equal(n) if normalized else np.ones(n)
    if normalized:
        return Weights.normalize(cfg.weights)
    return np.asarray(cfg.weights)


def run_verification(vid: str, density, cfg: ExperimentConfig, lam_override=None) -> list:
    flow = H.FlowParams(cfg.flow.T, cfg.flow.nodes, cfg.flow.s0)
    n = density.blocks.n
    sp = cfg.spatial
    if vid == "classical_epi":
        return [H.verify_classical_epi(density, spatial=sp)]
    if vid == "lambda_fisher":
        lam = _weights(cfg, n, False) if lam_override is None else lam_override
        return [H.verify_lambda_fisher(density, lam, spatial=sp)]
    if vid == "optimized_stam":
        return [H.verify_optimized_stam(density, spatial=sp)]
    if vid == "weighted_fisher":
        return [H.verify_weighted_fisher(density, _weights(cfg, n, True), spatial=sp)]
    if vid == "dependent_linearized":
        return H.verify_dependent_linearized(density, _weights(cfg, n, True), cfg.t_list, flow, spatial=sp)
    if vid == "conditional_linearized":
        return H.verify_conditional_linearized(density, _weights(cfg, n, True), cfg.t_list, flow, spatial=sp)
    if vid == "dependent_epi":
        return [H.verify_dependent_epi(density, flow, spatial=sp)]
    if vid == "conditional_epi":
        return [H.verify_conditional_epi(density, flow, spatial=sp)]
    if vid == "conditional_epi_clean":
        return [H.verify_conditional_epi_clean(density, spatial=sp)]
    if vid == "supermodular_epi":
        return [H.verify_supermodular_epi(density, flow, spatial=sp)]
    if vid == "rioul_condition":
        return [H.rioul_condition_check(density, flow=flow)]
    if vid == "hao_jog":
        return [H.hao_jog_comparison(density, cfg.symmetric, spatial=sp)]
    raise ConfigInvalid(f"verifications: unknown id {vid!r}")


def run_certificates(density, cfg: ExperimentConfig) -> list:
    l = cfg.lsm
    if isinstance(density, GaussianDensity):
        reports = [gaussian_lsm_check(density)]
    else:
        reports = [lattice_check(density, l.pairs, l.seed, l.tol), mixed_partials_check(density, l.tol)]
    out = [r.to_dict() for r in reports]
    if reports[-1].holds and l.s_values:
        out.append({"method": "class_C", "reports": [r.to_dict() for r in class_C_check(density, l.s_values, l.tol if isinstance(density, GridDensity) else None)]})
    return out


def evaluate(cfg: ExperimentConfig, density, lam_override=None) -> list:
    """All requested verifications for one density, in declaration order."""
    batches = parallel_map(lambda vid: run_verification(vid, density, cfg, lam_override), list(cfg.verifications))
    return [r for batch in batches for r in batch]


# ---------------------------------------------------------------------------
# output


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return "" if x is None else str(x)


def csv_text(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def report_row(rep: H.VerificationReport, param=None) -> dict:
    return {
        "id": rep.id,
        "param": param,
        "lhs": rep.lhs,
        "rhs": rep.rhs,
        "margin": rep.margin,
        "budget": rep.numeric_budget,
        "verdict": rep.verdict,
    }


def _collect_remainders(reports: list) -> list:
    out = []
    for rep in reports:
        for key in ("Rbar", "Sbar", "remainder"):
            val = rep.extra.get(key)
            if isinstance(val, dict):
                out.append({"report": rep.id, "kind": key, **H._jsonable(val)})
    return out


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False, default=_json_default, allow_nan=True) + "\n")


def print_table(rows: list, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(f"{'id':34s} {'param':>10s} {'lhs':>14s} {'rhs':>14s} {'margin':>12s} {'budget':>10s}  verdict\n")
    for r in rows:
        p = "" if r["param"] is None else f"{r['param']:.4g}"
        stream.write(
            f"{r['id']:34s} {p:>10s} {r['lhs']:14.8g} {r['rhs']:14.8g} {r['margin']:12.4e} {r['budget']:10.2e}  {r['verdict']}\n"
        )


def exit_status(rows: list) -> int:
    for r in rows:
        base = r["id"].split("[")[0]
        if r["verdict"] == "violated" and base not in EXPLORATORY_IDS:
            return EXIT_VIOLATED
    return EXIT_OK


def _out_dir(cfg: ExperimentConfig, arg: Optional[str]) -> Path:
    out = Path(arg or cfg.out or Path("epilab_out") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_run(cfg: ExperimentConfig, out_arg: Optional[str]) -> int:
    density = build_density(cfg.density)
    reports = evaluate(cfg, density)
    rows = [report_row(r) for r in reports]
    payload = {
        "name": cfg.name,
        "config": {"density": cfg.density, "verifications": list(cfg.verifications), "seed": cfg.seed},
        "reports": [r.to_dict() for r in reports],
        "remainders": _collect_remainders(reports),
    }
    if cfg.lsm is not None:
        payload["certificates"] = run_certificates(density, cfg)
    out = _out_dir(cfg, out_arg)
    write_json(out / "report.json", payload)
    (out / "report.csv").write_text(csv_text(rows))
    print_table(rows)
    return exit_status(rows)


def sweep_summary(rows: list) -> dict:
    """Per id: monotonicity, sign-change brackets and the minimum margin."""
    summary = {}
    for vid in dict.fromkeys(r["id"] for r in rows):
        pts = [(r["param"], r["margin"], r["budget"]) for r in rows if r["id"] == vid]
        params = np.array([p for p, _, _ in pts])
        margins = np.array([m for _, m, _ in pts])
        diffs = np.diff(margins)
        if len(diffs) and np.all(diffs > 0):
            mono = "increasing"
        elif len(diffs) and np.all(diffs < 0):
            mono = "decreasing"
        elif len(diffs) and np.all(diffs >= 0):
            mono = "nondecreasing"
        elif len(diffs) and np.all(diffs <= 0):
            mono = "nonincreasing"
        else:
            mono = "none"
        # zero within budget does not count as a sign
        signed = [(p, math.copysign(1.0, m)) for p, m, b in pts if abs(m) > b]
        brackets = [[a[0], b[0]] for a, b in zip(signed, signed[1:]) if a[1] != b[1]]
        k = int(np.argmin(margins))
        summary[vid] = {
            "monotonicity": mono,
            "sign_changes": brackets,
            "min_margin": float(margins[k]),
            "argmin": float(params[k]),
            "zeros": [float(p) for p, m, b in pts if abs(m) <= b],
        }
    return summary


def cmd_sweep(cfg: ExperimentConfig, out_arg: Optional[str]) -> int:
    if cfg.sweep is None:
        raise ConfigInvalid("sweep: required for the sweep command")

    def point(value):
        if cfg.sweep.param == THETA:
            lam = np.array([math.cos(value), math.sin(value)])
            return evaluate(cfg, build_density(cfg.density), lam_override=lam)
        return evaluate(cfg, build_density(cfg.density_at(value)))

    results = parallel_map(point, list(cfg.sweep.values))
    rows = [report_row(rep, v) for v, reps in zip(cfg.sweep.values, results) for rep in reps]
    summary = sweep_summary(rows)
    out = _out_dir(cfg, out_arg)
    (out / "sweep.csv").write_text(csv_text(rows))
    write_json(out / "sweep_summary.json", {"name": cfg.name, "param": cfg.sweep.param, "summary": summary})
    print_table(rows)
    return exit_status(rows)


def cmd_catalog(stream=None) -> int:
    stream = stream or sys.stdout
    stream.write("densities:\n")
    stream.write("  gaussian                 closed form; mean/cov or r/var with n, d\n")
    for name, (_, params, desc) in GRID_CATALOG.items():
        stream.write(f"  grid:{name:20s} {desc} (params: {', '.join(params)})\n")
    stream.write("verifications:\n")
    for vid in VERIFICATION_IDS:
        note = " (exploratory)" if vid in EXPLORATORY_IDS else ""
        stream.write(f"  {vid}{note}\n")
    stream.write("bundled configs:\n")
    for name in bundled_configs():
        stream.write(f"  {name}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epilab", description="Entropy-power and Fisher-information checks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run the verifications of a config"), ("sweep", "run a parameter sweep")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to a JSON config, or the name of a bundled one")
        p.add_argument("--out", help="output directory")
    sub.add_parser("catalog", help="list built-in densities and verification ids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "catalog":
        return cmd_catalog()
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            return cmd_run(cfg, args.out)
        return cmd_sweep(cfg, args.out)
    except ConfigInvalid as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_FAILURE
    except EpilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
