#!/usr/bin/env python3
"""sketchrefine command line.

Usage:
    python -m sketchrefine.main solve A.mtx b.mtx --out x.mtx
    python -m sketchrefine.main bench convergence --seeds 2 --out conv.csv
    python -m sketchrefine.main bench failrate --threads 8

Defaults come from ``sketchrefine.config.settings`` (env prefix
``SKETCHREFINE_``); explicit flags win over the environment.
Exit codes: 0 success, 1 solver failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from typing import Any, Optional, Sequence

from pydantic import ValidationError

from sketchrefine import __version__
from sketchrefine.bench.service import RUNNERS, build_spec, run_solve
from sketchrefine.common.constants import (
    EXIT_OK,
    EXIT_SOLVER_FAILURE,
    EXIT_USAGE,
    ExperimentName,
    MetaKind,
    SketchKind,
    SolverName,
)
from sketchrefine.common.exceptions import SketchRefineError, SolverDivergenceError, problem_detail
from sketchrefine.config import parse_float_list, settings
from sketchrefine.meta_solvers.schemas import MetaConfig

logger = logging.getLogger("sketchrefine")

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s — %(message)s"

# bench subcommand → experiment
BENCH_COMMANDS = {
    "convergence": ExperimentName.convergence,
    "sweep": ExperimentName.sweep,
    "residual-size": ExperimentName.residual_size,
    "failrate": ExperimentName.failrate,
    "nscale": ExperimentName.nscale,
}

# settings field → spec field, applied to presets only when set in the environment
_GRID_SETTINGS = {"M": "m", "N": "n_values", "S": "s", "KAPPA": "kappas", "BETA": "betas", "SEEDS": "seeds"}


# ── Parser ──────────────────────────────────────────────────────────

def _solver_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--s", type=int, help="Sketch rows")
    common.add_argument("--sketch", choices=[k.value for k in SketchKind], help="Sketch kind")
    common.add_argument("--zeta", type=int, help="Nonzeros per column (sparse sign)")
    common.add_argument("--meta", choices=[k.value for k in MetaKind], help="Meta-solver")
    common.add_argument("--krylov-k", type=int, help="Krylov steps of the meta-solver")
    common.add_argument("--srr-depth", type=int, help="SRR depth inside SIRR")
    common.add_argument("--srr-standalone-depth", type=int, help="Depth of standalone SRR")
    common.add_argument("--max-outer", type=int, help="Outer iteration cap")
    common.add_argument("--master-seed", type=int, help="Master seed for all derived streams")
    common.add_argument("--out", type=str, help="Output path")
    common.add_argument("--log-level", type=str, help="Logging level (default: settings.LOG_LEVEL)")
    common.add_argument("--json", action="store_true", help="Print errors as problem-detail JSON")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _solver_flags()
    parser = argparse.ArgumentParser(
        prog="sketchrefine",
        description="Randomized least-squares solvers with sketched refinement",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Environment overrides (prefix SKETCHREFINE_):
    M, N, S, KAPPA, BETA, SEEDS, REPEATS, SKETCH, ZETA, META, KRYLOV_K,
    SRR_DEPTH, SRR_STANDALONE_DEPTH, MAX_OUTER, OUT, THREADS, MASTER_SEED, LOG_LEVEL

Exit codes:
    {EXIT_OK} success   {EXIT_SOLVER_FAILURE} solver failure   {EXIT_USAGE} usage / I/O error
""",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="Solve a MatrixMarket system")
    solve.add_argument("a_path", help="Matrix A (MatrixMarket array format)")
    solve.add_argument("b_path", help="Right-hand side b (MatrixMarket array format)")
    solve.add_argument("--solver", choices=[s.value for s in SolverName], default=SolverName.sirr.value)

    bench = commands.add_parser("bench", help="Run an experiment grid and write CSV")
    experiments = bench.add_subparsers(dest="experiment", required=True)
    for name in BENCH_COMMANDS:
        sub = experiments.add_parser(name, parents=[common], help=f"{name} experiment")
        sub.add_argument("--m", type=int, help="Rows of A")
        sub.add_argument("--n", type=int, help="Columns of A")
        sub.add_argument("--kappa", type=str, help="Comma-separated condition numbers")
        sub.add_argument("--beta", type=str, help="Comma-separated residual norms")
        sub.add_argument("--seeds", type=int, help="Problem instances per grid cell")
        sub.add_argument("--repeats", type=int, help="Sketch draws per instance")
        sub.add_argument("--threads", type=int, help="Worker processes (0 = logical cores)")
    return parser


# ── Flag resolution ─────────────────────────────────────────────────

def _pick(flag: Any, default: Any) -> Any:
    return default if flag is None else flag


def _meta_config(args: argparse.Namespace) -> MetaConfig:
    return MetaConfig(
        kind=MetaKind(_pick(args.meta, settings.META)),
        k=_pick(args.krylov_k, settings.KRYLOV_K),
    )


def _zeta(args: argparse.Namespace) -> Optional[int]:
    zeta = _pick(args.zeta, settings.ZETA)
    return zeta or None


def bench_overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Spec fields from environment-set grid settings, then explicit flags."""
    env_grid: dict[str, Any] = {}
    for field, target in _GRID_SETTINGS.items():
        if field in settings.model_fields_set:
            env_grid[target] = getattr(settings, field)
    if "n_values" in env_grid:
        env_grid["n_values"] = [env_grid["n_values"]]
    if "kappas" in env_grid:
        env_grid["kappas"] = settings.kappa_list
    if "betas" in env_grid:
        env_grid["betas"] = settings.beta_list

    threads = _pick(args.threads, settings.THREADS)
    flags = {
        "m": args.m,
        "n_values": [args.n] if args.n is not None else None,
        "s": args.s,
        "kappas": parse_float_list(args.kappa, "kappa") if args.kappa else None,
        "betas": parse_float_list(args.beta, "beta") if args.beta else None,
        "seeds": args.seeds,
    }
    return {
        **env_grid,
        **{k: v for k, v in flags.items() if v is not None},
        "repeats": _pick(args.repeats, settings.REPEATS),
        "sketch": SketchKind(_pick(args.sketch, settings.SKETCH)),
        "zeta": _zeta(args),
        "meta": _meta_config(args),
        "srr_depth": _pick(args.srr_depth, settings.SRR_DEPTH),
        "srr_standalone_depth": _pick(args.srr_standalone_depth, settings.SRR_STANDALONE_DEPTH),
        "max_outer": _pick(args.max_outer, settings.MAX_OUTER),
        "master_seed": _pick(args.master_seed, settings.MASTER_SEED),
        "threads": threads if threads > 0 else settings.worker_count,
        "out": _pick(args.out, settings.OUT),
    }


# ── Commands ────────────────────────────────────────────────────────

def cmd_solve(args: argparse.Namespace) -> int:
    outcome = run_solve(
        args.a_path,
        args.b_path,
        _pick(args.out, "x_hat.mtx"),
        SolverName(args.solver),
        s=args.s,
        sketch=SketchKind(_pick(args.sketch, settings.SKETCH)),
        zeta=_zeta(args),
        meta=_meta_config(args),
        srr_depth=_pick(args.srr_depth, settings.SRR_DEPTH),
        srr_standalone_depth=_pick(args.srr_standalone_depth, settings.SRR_STANDALONE_DEPTH),
        max_outer=_pick(args.max_outer, settings.MAX_OUTER),
        master_seed=_pick(args.master_seed, settings.MASTER_SEED),
    )
    print(f"solver       : {outcome.solver.value}")
    print(f"solution     : {outcome.out}")
    print(f"iterations   : {outcome.iterations}")
    print(f"meta calls   : {outcome.meta_calls}")
    print(f"backward_kw  : {outcome.backward_kw:.6e}")
    print(f"converged    : {outcome.converged}")
    if outcome.diverged:
        raise SolverDivergenceError(outcome.solver.value, outcome.iterations)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    name = BENCH_COMMANDS[args.experiment]
    spec = build_spec(name, bench_overrides(args))
    start = time.time()
    summary = RUNNERS[name](spec)
    elapsed = time.time() - start

    print(f"""
{'=' * 60}
  {name.value.upper()} COMPLETE — {elapsed:.1f}s elapsed
  Output    : {summary.out}
  Instances : {summary.instances_run} run, {summary.instances_skipped} already recorded
  Rows      : {summary.rows_written} written, {summary.failed_rows} failed
{'=' * 60}""")
    for key, value in summary.extras.items():
        print(f"  {key:<28} {value:.4g}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=_pick(args.log_level, settings.LOG_LEVEL).upper(),
        format=LOG_FORMAT,
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    try:
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_bench(args)
    except SketchRefineError as exc:
        if args.json:
            print(json.dumps(problem_detail(exc, instance=args.command), indent=2), file=sys.stderr)
        else:
            logger.error("%s: %s", exc.title, exc.detail)
            for field, messages in (exc.errors or {}).items():
                logger.error("  %s: %s", field, "; ".join(messages))
        return exc.exit_code
    except ValidationError as exc:
        logger.error("Invalid parameters: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
