"""Experiment runners.

Every experiment expands its spec into :class:`InstanceJob` units. A job
generates its problem and sketch from derived seeds, runs each requested
solver on it, and returns its rows. Jobs are independent, so they fan out to
a process pool while a single writer appends results in job order.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np

from sketchrefine.bench.schemas import (
    ExperimentSpec,
    FailureSummary,
    InstanceJob,
    ResultRow,
    RunSummary,
    SolveOutcome,
)
from sketchrefine.bench.writer import ResultWriter, job_key, read_results
from sketchrefine.common.constants import (
    DEFAULT_MAX_OUTER,
    DEFAULT_SRR_DEPTH,
    DEFAULT_SRR_STANDALONE_DEPTH,
    FAILRATE_THRESHOLD,
    STREAM_PROBLEM,
    STREAM_SKETCH,
    UNIT_ROUNDOFF,
    ExperimentName,
    SchemeKind,
    SketchKind,
    SolverName,
)
from sketchrefine.common.exceptions import InvalidParameterError, SketchRefineError
from sketchrefine.common.rng import derive_seed
from sketchrefine.la_core.service import as_dense_matrix, as_vector, thin_svd
from sketchrefine.meta_solvers.schemas import MetaConfig
from sketchrefine.metrics.schemas import ErrorTriple
from sketchrefine.metrics.service import evaluate, kw_backward_error, make_tracer, qr_direct_solve
from sketchrefine.precond.schemas import Preconditioner
from sketchrefine.precond.service import build_with_resampling
from sketchrefine.problems.matrix_market import load_matrix_market, load_vector, save_matrix_market
from sketchrefine.problems.service import difficulty_levels, gen_synthetic
from sketchrefine.refine.schemas import RefinePlan, SolveReport, StopRule
from sketchrefine.refine.service import Tracer, expected_meta_calls, sir, sirr, srr_standalone
from sketchrefine.sketch.schemas import SketchOperator
from sketchrefine.sketch.service import default_zeta, make_sketch

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_NAN_TRIPLE = ErrorTriple(forward=math.nan, residual=math.nan, backward_kw=math.nan)


# ── Presets ─────────────────────────────────────────────────────────

# reference grids, reduced where a desktop cannot reach them
PRESETS: dict[ExperimentName, dict[str, Any]] = {
    ExperimentName.convergence: dict(
        m=2000, n_values=[50], s=200, kappas=[1e4, 1e8, 1e12], betas=[1e-1, 1e-3], seeds=10,
        solvers=[SolverName.sirr, SolverName.sir, SolverName.srr, SolverName.qr_direct], trace=True,
    ),
    ExperimentName.sweep: dict(
        m=5000, n_values=[200], s=600, levels=17, seeds=1,
        solvers=[SolverName.sirr, SolverName.sir, SolverName.srr, SolverName.qr_direct],
    ),
    ExperimentName.residual_size: dict(
        m=2000, n_values=[50], s=200, kappas=[1e4, 1e8, 1e12],
        betas=[float(10.0**-e) for e in range(1, 10)], seeds=10,
        solvers=[SolverName.sirr, SolverName.srr, SolverName.qr_direct],
    ),
    ExperimentName.failrate: dict(
        m=2000, n_values=[100], s_ratios=[round(1.1 + 0.05 * i, 2) for i in range(59)],
        kappas=[1e4, 1e8, 1e12], betas=[1e-1, 1e-3], seeds=100,
        solvers=[SolverName.sirr], failure_threshold=FAILRATE_THRESHOLD,
    ),
    ExperimentName.nscale: dict(
        m=10000, n_values=[100, 200, 400], s_ratios=[4.0], kappas=[1e8], betas=[1e-3], seeds=5,
        solvers=[SolverName.sirr, SolverName.qr_direct],
        substitutions=["n grid capped at 400 (reference grid reaches 1600)"],
    ),
}


def build_spec(name: ExperimentName, overrides: Optional[dict[str, Any]] = None) -> ExperimentSpec:
    """Preset for *name* with *overrides* applied; ``None`` values are ignored."""
    name = ExperimentName(name)
    if name not in PRESETS:
        raise InvalidParameterError({"experiment": [f"no preset grid for {name.value!r}"]})
    fields = dict(PRESETS[name])
    fields.update({k: v for k, v in (overrides or {}).items() if v is not None})
    spec = ExperimentSpec(name=name, **fields)
    validate_spec(spec)
    return spec


def validate_spec(spec: ExperimentSpec) -> None:
    """Check the whole grid up front; nothing runs on an invalid spec."""
    errors: dict[str, list[str]] = {}
    n_max = max(spec.n_values)
    if min(spec.n_values) < 1:
        errors.setdefault("n", []).append("every n must be >= 1")
    if spec.m <= n_max:
        errors.setdefault("m", []).append(f"need m > n, got m={spec.m}, n={n_max}")
    for n, s in _ns_pairs(spec):
        if s < n:
            errors.setdefault("s", []).append(f"sketch rows s={s} must be >= n={n}")
        if spec.sketch == SketchKind.gaussian and s > spec.m:
            errors.setdefault("s", []).append(f"gaussian sketch needs s <= m, got s={s}")
        if spec.sketch == SketchKind.sparse_sign and spec.zeta is not None and not 1 <= spec.zeta <= s:
            errors.setdefault("zeta", []).append(f"need 1 <= zeta <= s, got zeta={spec.zeta}, s={s}")
    if spec.s == 0 and not spec.s_ratios:
        errors.setdefault("s", []).append("need s > 0 or a list of s/n ratios")
    if spec.s_ratios is not None and any(r < 1.0 for r in spec.s_ratios):
        errors.setdefault("s_ratios", []).append("every ratio s/n must be >= 1")
    if spec.levels is not None and spec.levels < 2:
        errors.setdefault("levels", []).append(f"levels must be >= 2, got {spec.levels}")
    if spec.levels is None:
        if any(not k >= 1.0 for k in spec.kappas):
            errors.setdefault("kappa", []).append("every kappa must be >= 1")
        if any(not b >= 0.0 for b in spec.betas):
            errors.setdefault("beta", []).append("every beta must be >= 0")
        if n_max == 1 and any(k != 1.0 for k in spec.kappas):
            errors.setdefault("kappa", []).append("n=1 admits only kappa=1")
    if spec.failure_threshold is not None and not spec.failure_threshold > 0:
        errors.setdefault("failure_threshold", []).append("must be > 0")
    if errors:
        raise InvalidParameterError(errors)


def _ns_pairs(spec: ExperimentSpec) -> list[tuple[int, int]]:
    pairs = []
    for n in spec.n_values:
        if spec.s > 0 or spec.s_ratios is None:
            pairs.append((n, spec.s))
        else:
            pairs.extend((n, int(round(ratio * n))) for ratio in spec.s_ratios)
    return pairs


def _cells(spec: ExperimentSpec) -> list[tuple[float, float]]:
    if spec.levels is not None:
        return [(float(d), UNIT_ROUNDOFF * float(d)) for d in difficulty_levels(spec.levels)]
    return [(float(k), float(b)) for k, b in itertools.product(spec.kappas, spec.betas)]


def expand_jobs(spec: ExperimentSpec) -> list[InstanceJob]:
    """All instances of *spec*, in write order.

    The problem seed ignores s, so different sketch sizes see the same
    problems; the sketch seed additionally depends on s and the repeat.
    """
    jobs = []
    for (n, s), (c, (kappa, beta)) in itertools.product(_ns_pairs(spec), enumerate(_cells(spec))):
        for seed_idx in range(spec.seeds):
            problem_seed = derive_seed(spec.master_seed, STREAM_PROBLEM, spec.m, n, c, seed_idx)
            for rep in range(spec.repeats):
                jobs.append(
                    InstanceJob(
                        m=spec.m, n=n, s=s, kappa=kappa, beta=beta,
                        problem_seed=problem_seed,
                        sketch_seed=derive_seed(spec.master_seed, STREAM_SKETCH, spec.m, n, s, c, seed_idx, rep),
                    )
                )
    return jobs


def describe(spec: ExperimentSpec) -> dict[str, str]:
    """CSV metadata lines for *spec*."""
    zeta_rule = "n/a" if spec.sketch == SketchKind.gaussian else (
        str(spec.zeta) if spec.zeta else "ceil(2*log2(n))"
    )
    metadata = {
        "experiment": spec.name.value,
        "meta": spec.meta.kind.value,
        "krylov_k": str(spec.meta.k),
        "sketch": spec.sketch.value,
        "zeta": zeta_rule,
        "srr_depth": str(spec.srr_depth),
        "srr_standalone_depth": str(spec.srr_standalone_depth),
        "max_outer": str(spec.max_outer),
        "master_seed": str(spec.master_seed),
        "seeds": str(spec.seeds),
        "repeats": str(spec.repeats),
    }
    for i, note in enumerate(spec.substitutions, start=1):
        metadata[f"substitution.{i}"] = note
    return metadata


# ── One instance ────────────────────────────────────────────────────

def _plan(scheme: SchemeKind, meta: MetaConfig, srr_depth: int, max_outer: int) -> RefinePlan:
    return RefinePlan(
        scheme=scheme,
        n_outer=max_outer,
        srr_depth=srr_depth,
        meta=meta,
        stop=StopRule(max_outer=max_outer),
    )


def _run_scheme(
    solver: SolverName,
    A: np.ndarray,
    b: np.ndarray,
    S: SketchOperator,
    p: Preconditioner,
    *,
    meta: MetaConfig,
    srr_depth: int,
    srr_standalone_depth: int,
    max_outer: int,
    tracer: Optional[Tracer] = None,
) -> SolveReport:
    if solver == SolverName.sirr:
        plan = _plan(SchemeKind.sirr, meta, srr_depth, max_outer)
        return sirr(A, b, S, plan, preconditioner=p, tracer=tracer)
    if solver == SolverName.sir:
        return sir(A, b, p, meta, _plan(SchemeKind.sir, meta, srr_depth, max_outer), tracer=tracer)
    return srr_standalone(
        A, b, S, srr_standalone_depth, meta,
        stop=StopRule(max_outer=max_outer), preconditioner=p, tracer=tracer,
    )


def _scheme_of(solver: SolverName) -> SchemeKind:
    return SchemeKind(solver.value)


def _is_failure(spec: ExperimentSpec, errors: ErrorTriple) -> bool:
    if spec.failure_threshold is None:
        return False
    residual = errors.residual
    return math.isfinite(residual) and residual > spec.failure_threshold


def run_instance(spec: ExperimentSpec, job: InstanceJob) -> list[ResultRow]:
    """Generate *job*'s problem, run every solver of *spec* on it, return rows."""
    problem = gen_synthetic(job.m, job.n, job.kappa, job.beta, job.problem_seed)
    svd_A = thin_svd(problem.a)
    tracer = make_tracer(problem.a, problem.b, svd_A, problem.x_star) if spec.trace else None

    def row(solver: SolverName, iteration: int, errors: ErrorTriple, meta_calls: int,
            wall: float, converged: bool, failed: bool) -> ResultRow:
        return ResultRow(
            experiment=spec.name, solver=solver, m=job.m, n=job.n, s=job.s,
            kappa=job.kappa, beta=job.beta, seed=job.sketch_seed, iteration=iteration,
            forward_err=errors.forward, residual_err=errors.residual, backward_kw=errors.backward_kw,
            meta_calls=meta_calls, wall_time_s=wall, converged=converged, failed=failed,
        )

    p = S = None
    precond_error: Optional[SketchRefineError] = None
    if any(solver != SolverName.qr_direct for solver in spec.solvers):
        zeta = spec.zeta or default_zeta(job.n, job.s)

        def factory(seed: int) -> SketchOperator:
            return make_sketch(spec.sketch, job.s, job.m, seed, n=job.n, zeta=zeta)

        try:
            p, S = build_with_resampling(problem.a, factory, job.sketch_seed)
        except SketchRefineError as exc:
            precond_error = exc
            logger.warning("Preconditioner failed (kappa=%.1e, seed=%d): %s", job.kappa, job.sketch_seed, exc.detail)

    rows: list[ResultRow] = []
    for solver in spec.solvers:
        start = time.perf_counter()
        if solver == SolverName.qr_direct:
            try:
                x_hat = qr_direct_solve(problem.a, problem.b)
                errors = evaluate(problem.a, problem.b, svd_A, x_hat, problem.x_star)
                rows.append(row(solver, 0, errors, 0, time.perf_counter() - start, True, _is_failure(spec, errors)))
            except (SketchRefineError, np.linalg.LinAlgError) as exc:
                logger.warning("qr_direct failed on seed %d: %s", job.problem_seed, exc)
                rows.append(row(solver, 0, _NAN_TRIPLE, 0, time.perf_counter() - start, False, True))
            continue

        if precond_error is not None:
            rows.append(row(solver, 0, _NAN_TRIPLE, 0, 0.0, False, True))
            continue

        try:
            report = _run_scheme(
                solver, problem.a, problem.b, S, p,
                meta=spec.meta, srr_depth=spec.srr_depth, srr_standalone_depth=spec.srr_standalone_depth,
                max_outer=spec.max_outer, tracer=tracer,
            )
        except (SketchRefineError, np.linalg.LinAlgError) as exc:
            logger.warning("%s failed on seed %d: %s", solver.value, job.sketch_seed, exc)
            rows.append(row(solver, 0, _NAN_TRIPLE, 0, time.perf_counter() - start, False, True))
            continue

        depth = spec.srr_depth
        failed = report.diverged or not report.is_finite
        if tracer is not None:
            for record in report.iterates:
                errors = ErrorTriple(
                    forward=record.forward_err, residual=record.residual_err, backward_kw=record.kw_backward_err,
                )
                calls = expected_meta_calls(
                    _scheme_of(solver), record.iteration, record.iteration if solver == SolverName.srr else depth,
                )
                rows.append(row(solver, record.iteration, errors, calls, report.wall_time, report.converged,
                                failed or _is_failure(spec, errors)))
            continue

        errors = (
            evaluate(problem.a, problem.b, svd_A, report.x_hat, problem.x_star) if report.is_finite else _NAN_TRIPLE
        )
        rows.append(row(solver, report.outer_iterations, errors, report.meta_calls, report.wall_time,
                        report.converged, failed or _is_failure(spec, errors)))
    return rows


# ── Driver ──────────────────────────────────────────────────────────

def run_experiment(spec: ExperimentSpec) -> RunSummary:
    """Validate, expand, skip recorded instances, run the rest, write rows."""
    validate_spec(spec)
    jobs = expand_jobs(spec)
    summary = RunSummary(experiment=spec.name, out=spec.out)

    with ResultWriter(spec.out, describe(spec)) as writer:
        pending = [job for job in jobs if not writer.is_done(job_key(spec.name, job))]
        summary.instances_skipped = len(jobs) - len(pending)
        logger.info(
            "%s: %d instances (%d already recorded), %d worker(s)",
            spec.name.value, len(jobs), summary.instances_skipped, spec.threads,
        )

        worker = partial(run_instance, spec)
        if spec.threads > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=spec.threads) as pool:
                results: Iterable[list[ResultRow]] = pool.map(worker, pending)
                _drain(writer, summary, pending, results)
        else:
            _drain(writer, summary, pending, map(worker, pending))

    logger.info(
        "%s done: %d rows written, %d failed, output %s",
        spec.name.value, summary.rows_written, summary.failed_rows, spec.out,
    )
    return summary


def _drain(writer: ResultWriter, summary: RunSummary, jobs: Sequence[InstanceJob], results: Iterable[list[ResultRow]]) -> None:
    for i, (job, rows) in enumerate(zip(jobs, results), start=1):
        summary.rows_written += writer.write_instance(rows)
        summary.instances_run += 1
        failed = sum(r.failed for r in rows)
        summary.failed_rows += failed
        logger.info(
            "[%d/%d] n=%d s=%d kappa=%.1e beta=%.1e%s",
            i, len(jobs), job.n, job.s, job.kappa, job.beta, f" ({failed} failed)" if failed else "",
        )


def run_convergence(spec: ExperimentSpec) -> RunSummary:
    """Per-iteration traces of the refinement schemes plus qr_direct levels."""
    return run_experiment(spec.model_copy(update={"trace": True}))


def run_sweep(spec: ExperimentSpec) -> RunSummary:
    """Final errors across the difficulty levels ``κ = d, β = u·d``."""
    if spec.levels is None:
        raise InvalidParameterError({"levels": ["sweep needs a level count"]})
    return run_experiment(spec)


def run_residual_size(spec: ExperimentSpec) -> RunSummary:
    """Final errors across residual norms β at each κ."""
    return run_experiment(spec)


def run_failrate(spec: ExperimentSpec) -> RunSummary:
    """Fail counts against sketch size; a run fails above the residual threshold."""
    if spec.failure_threshold is None:
        spec = spec.model_copy(update={"failure_threshold": FAILRATE_THRESHOLD})
    summary = run_experiment(spec)
    _, rows = read_results(spec.out)
    for cell in summarize_failures(rows):
        if cell.failures:
            logger.info(
                "%s s/n=%.2f kappa=%.0e beta=%.0e: %d/%d failed",
                cell.solver.value, cell.s / cell.n, cell.kappa, cell.beta, cell.failures, cell.runs,
            )
    summary.extras["max_fail_rate"] = max((c.rate for c in summarize_failures(rows)), default=0.0)
    return summary


def run_nscale(spec: ExperimentSpec) -> RunSummary:
    """Final errors against n; fits the backward-error growth exponent."""
    summary = run_experiment(spec)
    _, rows = read_results(spec.out)
    for solver in spec.solvers:
        ns, values = _mean_by_n(rows, solver, "backward_kw")
        if len(ns) >= 2:
            exponent = fit_growth_exponent(ns, values)
            summary.extras[f"{solver.value}_backward_growth"] = exponent
            logger.info("%s backward error grows like n^%.2f", solver.value, exponent)
    return summary


RUNNERS = {
    ExperimentName.convergence: run_convergence,
    ExperimentName.sweep: run_sweep,
    ExperimentName.residual_size: run_residual_size,
    ExperimentName.failrate: run_failrate,
    ExperimentName.nscale: run_nscale,
}


# ── Aggregation ─────────────────────────────────────────────────────

def fit_growth_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Slope of the least-squares line through ``(log n, log value)``."""
    ns_arr = np.asarray(ns, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    keep = (ns_arr > 0) & (vals > 0) & np.isfinite(vals)
    if keep.sum() < 2:
        raise InvalidParameterError({"values": ["need at least two positive finite points"]})
    slope, _ = np.polyfit(np.log(ns_arr[keep]), np.log(vals[keep]), 1)
    return float(slope)


def _mean_by_n(rows: Sequence[ResultRow], solver: SolverName, field: str) -> tuple[list[float], list[float]]:
    groups: dict[int, list[float]] = {}
    for r in rows:
        value = getattr(r, field)
        if r.solver == solver and not r.failed and math.isfinite(value):
            groups.setdefault(r.n, []).append(value)
    ns = sorted(groups)
    return [float(n) for n in ns], [float(np.mean(groups[n])) for n in ns]


def summarize_failures(rows: Iterable[ResultRow]) -> list[FailureSummary]:
    """Fail counts per (solver, m, n, s, κ, β) cell, in first-seen order."""
    cells: dict[tuple, list[int]] = {}
    for r in rows:
        counts = cells.setdefault((r.solver, r.m, r.n, r.s, r.kappa, r.beta), [0, 0])
        counts[0] += 1
        counts[1] += int(r.failed)
    return [
        FailureSummary(solver=k[0], m=k[1], n=k[2], s=k[3], kappa=k[4], beta=k[5], runs=c[0], failures=c[1])
        for k, c in cells.items()
    ]


# ── Solve ───────────────────────────────────────────────────────────

def solve_system(
    A: np.ndarray,
    b: np.ndarray,
    solver: SolverName = SolverName.sirr,
    *,
    s: Optional[int] = None,
    sketch: SketchKind = SketchKind.sparse_sign,
    zeta: Optional[int] = None,
    meta: Optional[MetaConfig] = None,
    srr_depth: int = DEFAULT_SRR_DEPTH,
    srr_standalone_depth: int = DEFAULT_SRR_STANDALONE_DEPTH,
    max_outer: int = DEFAULT_MAX_OUTER,
    master_seed: int = 0,
) -> tuple[np.ndarray, Optional[SolveReport]]:
    """Solve ``min ‖b − A·y‖`` with *solver*; qr_direct returns no report.

    A missing *s* defaults to ``4n`` (capped at m for the Gaussian kind).
    """
    A = as_dense_matrix(A, name="A")
    m, n = A.shape
    b = as_vector(b, length=m, name="b")

    if solver == SolverName.qr_direct:
        return qr_direct_solve(A, b), None

    if s is None:
        s = min(4 * n, m) if sketch == SketchKind.gaussian else 4 * n
    if s < n:
        raise InvalidParameterError({"s": [f"sketch rows s={s} must be >= n={n}"]})
    zeta = zeta or default_zeta(n, s)

    def factory(seed: int) -> SketchOperator:
        return make_sketch(sketch, s, m, seed, n=n, zeta=zeta)

    p, S = build_with_resampling(A, factory, derive_seed(master_seed, STREAM_SKETCH, m, n, s))
    report = _run_scheme(
        solver, A, b, S, p,
        meta=meta or MetaConfig(), srr_depth=srr_depth, srr_standalone_depth=srr_standalone_depth,
        max_outer=max_outer,
    )
    return report.x_hat, report


def run_solve(
    a_path: PathLike,
    b_path: PathLike,
    out: PathLike,
    solver: SolverName = SolverName.sirr,
    **options: Any,
) -> SolveOutcome:
    """Load a MatrixMarket system, solve it, write x̂ to *out*."""
    A = load_matrix_market(a_path)
    b = load_vector(b_path)
    start = time.perf_counter()
    x_hat, report = solve_system(A, b, solver, **options)
    elapsed = time.perf_counter() - start
    save_matrix_market(x_hat, out)

    finite = bool(np.all(np.isfinite(x_hat)))
    backward = kw_backward_error(thin_svd(A), b, x_hat) if finite else math.nan
    outcome = SolveOutcome(
        solver=solver,
        out=str(out),
        iterations=report.outer_iterations if report else 0,
        meta_calls=report.meta_calls if report else 0,
        backward_kw=backward,
        converged=report.converged if report else finite,
        diverged=report.diverged if report else not finite,
        wall_time_s=elapsed,
    )
    logger.info(
        "solve: %s finished after %d iterations, backward_kw=%.3e", solver.value, outcome.iterations, backward,
    )
    return outcome
