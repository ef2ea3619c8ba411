"""Command-line experiment runner.

    splinebvp run config.json [--output DIR] [--workers K]
    splinebvp list-problems
    splinebvp dump-spline solution.json 400 [--output FILE]

Output directory precedence: ``--output`` flag, then the
``SPLINEBVP_OUTPUT_DIR`` environment variable, then ``output_dir`` in the
config file, then ``./splinebvp_output``.
"""

from __future__ import annotations

import argparse
import importlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bench import BenchmarkProblem, build_exact_spline, compute_metrics, get_problem, problem_names
from .errors import ConfigError, SplineBVPError
from .io import (
    TABLE_COLUMNS,
    load_spline,
    solution_record,
    spline_samples,
    write_csv,
    write_json,
    write_residual_profile,
    write_spline_samples,
    write_trace,
)
from .optimize import OptimizeOptions
from .solver import Escalate, Relocate, SolverConfig, check_bc, solve

log = logging.getLogger("splinebvp")

ENV_OUTPUT = "SPLINEBVP_OUTPUT_DIR"
DEFAULT_OUTPUT = "splinebvp_output"

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

CONFIG_KEYS = {
    "problem",
    "degree",
    "knot_mode",
    "knots",
    "intervals",
    "seeds",
    "strategy",
    "collocation_count",
    "norm",
    "optimizer",
    "output_dir",
    "emit",
    "sample_count",
}
EMIT_KEYS = ("trace", "residual", "spline", "solution")


@dataclass
class ExperimentConfig:
    """Parsed run configuration.

    ``knot_counts`` are numbers of knots, the unit the result tables use;
    a config may give ``intervals`` instead.
    """

    problem: object
    degree: int
    knot_mode: str
    knot_counts: list
    seeds: list
    strategy: dict = field(default_factory=lambda: {"kind": "none"})
    collocation_count: int = 100
    norm: str = "L2"
    optimizer: dict = field(default_factory=dict)
    output_dir: str = DEFAULT_OUTPUT
    emit: dict = field(default_factory=lambda: {k: True for k in EMIT_KEYS})
    sample_count: int = 400


def _resolve_problem(selector) -> BenchmarkProblem:
    """Built-in name, or ``{"factory": "module:function"}`` returning a
    :class:`BenchmarkProblem` (its ``exact`` may be None)."""
    if isinstance(selector, str):
        try:
            return get_problem(selector)
        except KeyError:
            raise ConfigError(
                f"unknown problem {selector!r}; valid choices: {', '.join(problem_names())}"
            ) from None
    if isinstance(selector, dict) and "factory" in selector:
        target = selector["factory"]
        mod_name, _, attr = target.partition(":")
        try:
            bp = getattr(importlib.import_module(mod_name), attr)(**selector.get("kwargs", {}))
        except (ImportError, AttributeError, TypeError) as exc:
            raise ConfigError(f"cannot load problem factory {target!r}: {exc}") from None
        if not isinstance(bp, BenchmarkProblem):
            raise ConfigError(f"factory {target!r} must return a BenchmarkProblem")
        return bp
    raise ConfigError(
        f"problem must be a built-in name ({', '.join(problem_names())}) or a factory spec"
    )


def _strategy(spec: dict, knots_to_n):
    kind = spec.get("kind", "none")
    if kind == "none":
        return None
    if kind == "escalate":
        sched = [knots_to_n(k) for k in spec.get("schedule", [])]
        return Escalate(tuple(sched), int(spec.get("iters_per_stage", 50)))
    if kind == "relocate":
        keys = ("period", "min_gap", "warmup", "rounds")
        return Relocate(**{k: spec[k] for k in keys if k in spec})
    raise ConfigError(f"unknown strategy kind {kind!r}; use none, escalate or relocate")


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "problem" not in raw:
        raise ConfigError(f"config needs 'problem'; valid choices: {', '.join(problem_names())}")
    bp = _resolve_problem(raw["problem"])
    if ("knots" in raw) == ("intervals" in raw):
        raise ConfigError("give exactly one of 'knots' (knot counts) or 'intervals'")
    if "knots" in raw:
        counts = [int(k) for k in raw["knots"]]
    else:
        counts = [int(n) + 1 for n in raw["intervals"]]
    if not counts or min(counts) < 3:
        raise ConfigError("every grid needs at least 3 knots")
    seeds = [int(s) for s in raw.get("seeds", [0])]
    if not seeds:
        raise ConfigError("seed list is empty")
    emit = {k: True for k in EMIT_KEYS}
    extra = set(raw.get("emit", {})) - set(EMIT_KEYS)
    if extra:
        raise ConfigError(f"unknown emit flags {sorted(extra)}; valid: {list(EMIT_KEYS)}")
    emit.update({k: bool(v) for k, v in raw.get("emit", {}).items()})
    return ExperimentConfig(
        problem=raw["problem"],
        degree=int(raw.get("degree", bp.degree)),
        knot_mode=raw.get("knot_mode", bp.knot_mode),
        knot_counts=sorted(set(counts)),
        seeds=sorted(set(seeds)),
        strategy=dict(raw.get("strategy", {"kind": "none"})),
        collocation_count=int(raw.get("collocation_count", 100)),
        norm=raw.get("norm", "L2"),
        optimizer=dict(raw.get("optimizer", {})),
        output_dir=str(raw.get("output_dir", DEFAULT_OUTPUT)),
        emit=emit,
        sample_count=int(raw.get("sample_count", 400)),
    )


def solver_config(exp: ExperimentConfig, knots: int, seed: int) -> SolverConfig:
    try:
        opts = OptimizeOptions(**exp.optimizer)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad optimizer options: {exc}") from None
    try:
        return SolverConfig(
            degree=exp.degree,
            knot_mode=exp.knot_mode,
            n=knots - 1,
            collocation_count=exp.collocation_count,
            norm=exp.norm,
            seed=seed,
            strategy=_strategy(exp.strategy, lambda k: int(k) - 1),
            optimizer=opts,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _metric_row(bp, spline, name, degree, knots, variant, seed):
    if bp.exact is None:
        m = {"residual_l2": float("nan")}
        errs = [float("nan")] * 3
    else:
        rep = compute_metrics(bp, spline)
        m = rep.as_row()
        errs = [rep.err_l2, rep.err_h1, rep.err_h2]
    return [name, degree, knots, variant, seed, m["residual_l2"], *errs]


def run_job(exp: ExperimentConfig, knots: int, seed: int, out: str) -> dict:
    """Solve one (grid, seed) pair and write its per-run files."""
    bp = _resolve_problem(exp.problem)
    cfg = solver_config(exp, knots, seed)
    name = bp.name
    tag = f"{name}_q{exp.degree}_k{knots}_s{seed}"
    started = time.perf_counter()
    try:
        sol = solve(bp.problem, bp.bc, cfg)
    except (SplineBVPError, FloatingPointError) as exc:
        return {
            "ok": False,
            "problem": name,
            "knots": knots,
            "seed": seed,
            "error": type(exc).__name__,
            "message": str(exc),
            "iteration": getattr(exc, "iteration", None),
        }
    elapsed = time.perf_counter() - started
    out = Path(out)
    if exp.emit["trace"]:
        write_trace(out / f"trace_{tag}.csv", sol.loss_history)
    if exp.emit["residual"]:
        write_residual_profile(out / f"residual_{tag}.csv", sol.collocation, sol.residual_profile)
    if exp.emit["spline"]:
        write_spline_samples(out / f"spline_{tag}.csv", sol.spline, exp.sample_count)
    if exp.emit["solution"]:
        write_json(out / f"solution_{tag}.json", solution_record(sol, problem=name))
    rows = [_metric_row(bp, sol.spline, name, exp.degree, knots, "solved", seed)]
    log.info("%s: loss %.3e after %d iterations (%.2fs)", tag, sol.loss, sol.iterations, elapsed)
    return {
        "ok": True,
        "problem": name,
        "knots": knots,
        "seed": seed,
        "seed_used": sol.seed,
        "rows": rows,
        "status": sol.status,
        "iterations": sol.iterations,
        "loss": sol.loss,
        "bc_residual": check_bc(bp.problem, bp.bc, sol),
        "final_knots": len(sol.knots_used),
    }


def _exact_row(exp, bp, knots):
    cfg = solver_config(exp, knots, exp.seeds[0])
    grid = cfg.grid(bp.problem.a, bp.problem.b)
    spline = build_exact_spline(bp, grid, exp.degree)
    return _metric_row(bp, spline, bp.name, exp.degree, knots, "exact", "")


def run(exp: ExperimentConfig, out: str, workers: int = 1) -> int:
    bp = _resolve_problem(exp.problem)
    # surface config errors before any solve starts
    for k in exp.knot_counts:
        solver_config(exp, k, exp.seeds[0])
    jobs = [(k, s) for k in exp.knot_counts for s in exp.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_job, exp, k, s, out) for k, s in jobs]
            results = [f.result() for f in futures]
    else:
        results = [run_job(exp, k, s, out) for k, s in jobs]

    rows = []
    if bp.exact is not None:
        for k in exp.knot_counts:
            rows.append(_exact_row(exp, bp, k))
    for res in results:
        if res["ok"]:
            rows.extend(res["rows"])
    variant_rank = {"exact": 0, "solved": 1}
    rows.sort(key=lambda r: (r[0], r[1], r[2], variant_rank[r[3]], -1 if r[4] == "" else r[4]))
    out = Path(out)
    write_csv(out / "table.csv", TABLE_COLUMNS, rows)

    failures = [r for r in results if not r["ok"]]
    summary = {
        "version": __version__,
        "numpy": np.__version__,
        "config": asdict(exp),
        "jobs": [{k: v for k, v in r.items() if k != "rows"} for r in results],
    }
    write_json(out / "summary.json", summary)
    if failures:
        write_json(out / "errors.json", {"failures": failures})
        for f in failures:
            print(
                f"solver failure: {f['problem']} knots={f['knots']} seed={f['seed']}: {f['message']}",
                file=sys.stderr,
            )
        return EXIT_SOLVER
    return EXIT_OK


def _output_dir(flag, exp):
    return flag or os.environ.get(ENV_OUTPUT) or exp.output_dir


def cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        exp = parse_config(raw)
        out = _output_dir(args.output, exp)
        Path(out).mkdir(parents=True, exist_ok=True)
        return run(exp, out, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def cmd_list(args) -> int:
    from .bench import builtin_problems

    for bp in builtin_problems():
        a, b = bp.domain
        print(f"{bp.name}\tdegree={bp.degree}\tknots={bp.knot_mode}\tdomain=[{a:.6g}, {b:.6g}]\tbc={type(bp.bc).__name__}")
    return EXIT_OK


def cmd_dump(args) -> int:
    try:
        spline = load_spline(args.solution)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"cannot read solution file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.samples < 2:
        print("need at least 2 samples", file=sys.stderr)
        return EXIT_CONFIG
    if args.output:
        write_spline_samples(args.output, spline, args.samples)
    else:
        import csv

        from .io import fmt

        header, rows = spline_samples(spline, args.samples)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splinebvp", description="Spline collocation BVP experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run the experiments in a JSON config")
    r.add_argument("config")
    r.add_argument("--output", help=f"output directory (overrides ${ENV_OUTPUT} and the config)")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-problems", help="list built-in problems")
    ls.set_defaults(func=cmd_list)
    d = sub.add_parser("dump-spline", help="sample a saved solution as CSV")
    d.add_argument("solution")
    d.add_argument("samples", type=int)
    d.add_argument("--output", help="CSV path (default: stdout)")
    d.set_defaults(func=cmd_dump)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
