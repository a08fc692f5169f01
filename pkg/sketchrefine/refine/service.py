"""SIR, SRR and SIRR drivers with iteration control and trace capture.

All normal-equation products are ``Aᵀ(A·z)``; residuals ``b − A·x`` are
recomputed from scratch every outer step, and corrections are added with
plain floating-point addition.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Any, Callable, Optional

import numpy as np

from sketchrefine.common.constants import (
    DIVERGENCE_GROWTH,
    DIVERGENCE_WINDOW,
    UNIT_ROUNDOFF,
    SchemeKind,
)
from sketchrefine.common.exceptions import InvalidParameterError
from sketchrefine.la_core.service import as_dense_matrix, as_vector, matvec, matvec_t, norm2, normal_matvec
from sketchrefine.meta_solvers.schemas import MetaConfig
from sketchrefine.meta_solvers.service import meta_normal, meta_residual
from sketchrefine.metrics.schemas import ErrorTriple
from sketchrefine.precond.schemas import Preconditioner
from sketchrefine.precond.service import build, sketch_solve
from sketchrefine.refine.schemas import IterationRecord, RefinePlan, SolveReport, StopRule
from sketchrefine.sketch.schemas import SketchOperator

logger = logging.getLogger(__name__)

Tracer = Callable[[np.ndarray], ErrorTriple]


# ── Iteration control ───────────────────────────────────────────────

class _IterationMonitor:
    """Collects per-iterate records and applies the stop/divergence rules."""

    def __init__(self, scheme: SchemeKind, stop: StopRule, tracer: Optional[Tracer]) -> None:
        self.scheme = scheme
        self.stop = stop
        self.tracer = tracer
        self.records: list[IterationRecord] = []
        self.update_norms: list[float] = []
        self.converged = False
        self.diverged = False
        self._streak = 0
        self._start = time.perf_counter()

    def record(self, iteration: int, x: np.ndarray, update_norm: float) -> None:
        errors = self.tracer(x) if self.tracer is not None else None
        self.records.append(
            IterationRecord(
                iteration=iteration,
                update_norm=update_norm,
                forward_err=errors.forward if errors else None,
                residual_err=errors.residual if errors else None,
                kw_backward_err=errors.backward_kw if errors else None,
            )
        )
        logger.debug("%s it=%d ‖update‖=%.3e", self.scheme.value, iteration, update_norm)

    def should_stop(self, iteration: int, x: np.ndarray, update_norm: float) -> bool:
        if not (math.isfinite(update_norm) and np.all(np.isfinite(x))):
            self.diverged = True
            logger.warning("%s produced non-finite iterate at step %d", self.scheme.value, iteration)
            return True

        self.update_norms.append(update_norm)
        if update_norm == 0.0:
            # exact fixed point: every later step repeats this one
            self.converged = True
            return True

        if update_norm <= self.stop.update_tol * norm2(x):
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self.stop.patience:
            self.converged = True
            logger.debug("%s update plateau reached at step %d", self.scheme.value, iteration)
            return True

        if self._is_diverging(norm2(x)):
            self.diverged = True
            logger.warning("%s diverging at step %d (‖update‖=%.3e)", self.scheme.value, iteration, update_norm)
            return True
        return False

    def _is_diverging(self, x_norm: float) -> bool:
        """Strictly rising updates over the window, ``DIVERGENCE_GROWTH``x overall,
        ending above both the first correction and ``‖x̂‖``."""
        if len(self.update_norms) <= DIVERGENCE_WINDOW:
            return False
        recent = self.update_norms[-(DIVERGENCE_WINDOW + 1):]
        increasing = all(later > earlier for earlier, later in zip(recent, recent[1:]))
        if not (increasing and recent[-1] >= DIVERGENCE_GROWTH * recent[0]):
            return False
        return recent[-1] > max(self.update_norms[0], x_norm)

    def report(self, x: np.ndarray, meta_calls: int, outer: int) -> SolveReport:
        return SolveReport(
            scheme=self.scheme,
            x_hat=x,
            iterates=self.records,
            converged=self.converged,
            diverged=self.diverged,
            meta_calls=meta_calls,
            outer_iterations=outer,
            wall_time=time.perf_counter() - self._start,
        )


def _validate_system(A: Any, b: Any) -> tuple[np.ndarray, np.ndarray]:
    A = as_dense_matrix(A, name="A")
    b = as_vector(b, length=A.shape[0], name="b")
    return A, b


def expected_meta_calls(scheme: SchemeKind, outer: int, depth: int = 0) -> int:
    """Meta-call count implied by a scheme after *outer* steps."""
    if scheme == SchemeKind.sir:
        return outer + 1
    if scheme == SchemeKind.srr:
        return 2**depth
    return 1 + outer * 2**depth


def suggest_srr_depth(contraction: float, target: float = UNIT_ROUNDOFF) -> int:
    """Smallest depth d with ``contraction^(2^d) ≤ target``."""
    if contraction >= 1.0:
        raise InvalidParameterError({"contraction": [f"need contraction < 1, got {contraction}"]})
    if contraction <= 0.0:
        return 0
    steps = math.log(target) / math.log(contraction)
    return max(0, math.ceil(math.log2(steps))) if steps > 1 else 0


# ── SIR ─────────────────────────────────────────────────────────────

def sir(
    A: Any,
    b: Any,
    p: Preconditioner,
    meta: Optional[MetaConfig] = None,
    plan: Optional[RefinePlan] = None,
    *,
    tracer: Optional[Tracer] = None,
) -> SolveReport:
    """Sketched iterative refinement: ``x_i = x_{i−1} + meta(b − A·x_{i−1})``."""
    A, b = _validate_system(A, b)
    plan = plan or RefinePlan(scheme=SchemeKind.sir)
    meta = meta or plan.meta
    monitor = _IterationMonitor(SchemeKind.sir, plan.stop, tracer)

    x = meta_residual(meta, A, p, b)
    calls = 1
    monitor.record(0, x, norm2(x))

    outer = 0
    for i in range(1, plan.outer_limit + 1):
        residual = b - matvec(A, x)
        update = meta_residual(meta, A, p, residual)
        calls += 1
        x = x + update
        outer = i
        update_norm = norm2(update)
        monitor.record(i, x, update_norm)
        if monitor.should_stop(i, x, update_norm):
            break
    return monitor.report(x, calls, outer)


# ── SRR ─────────────────────────────────────────────────────────────

def srr(A: np.ndarray, rA: Any, p: Preconditioner, meta: MetaConfig, depth: int) -> np.ndarray:
    """Sketched recursive refinement on a normal-equation right-hand side.

    ``f_0 = meta``; ``f_i(rA) = f_{i−1}(rA) + f_{i−1}(rA − AᵀA·f_{i−1}(rA))``.
    Uses exactly ``2^depth`` meta calls.
    """
    if depth < 0:
        raise InvalidParameterError({"depth": [f"depth must be >= 0, got {depth}"]})
    if depth == 0:
        return meta_normal(meta, A, p, rA)
    x = srr(A, rA, p, meta, depth - 1)
    rA = np.asarray(rA, dtype=np.float64)
    return x + srr(A, rA - normal_matvec(A, x), p, meta, depth - 1)


def srr_standalone(
    A: Any,
    b: Any,
    S: SketchOperator,
    depth: int,
    meta: Optional[MetaConfig] = None,
    *,
    stop: Optional[StopRule] = None,
    preconditioner: Optional[Preconditioner] = None,
    tracer: Optional[Tracer] = None,
) -> SolveReport:
    """SRR on ``rA = Aᵀb`` at successive depths 0..depth.

    Depth d reuses the depth d−1 result as its first term, so reaching depth
    d costs ``2^d`` meta calls in total and each depth is recorded.
    """
    A, b = _validate_system(A, b)
    if depth < 0:
        raise InvalidParameterError({"depth": [f"depth must be >= 0, got {depth}"]})
    meta = meta or MetaConfig()
    p = preconditioner or build(A, S)
    monitor = _IterationMonitor(SchemeKind.srr, stop or StopRule(), tracer)

    rA = matvec_t(A, b)
    x = meta_normal(meta, A, p, rA)
    calls = 1
    monitor.record(0, x, norm2(x))

    reached = 0
    for d in range(1, depth + 1):
        update = srr(A, rA - normal_matvec(A, x), p, meta, d - 1)
        calls += 2 ** (d - 1)
        x = x + update
        reached = d
        update_norm = norm2(update)
        monitor.record(d, x, update_norm)
        if monitor.should_stop(d, x, update_norm):
            break
    return monitor.report(x, calls, reached)


# ── SIRR ────────────────────────────────────────────────────────────

def sirr(
    A: Any,
    b: Any,
    S: SketchOperator,
    plan: Optional[RefinePlan] = None,
    *,
    preconditioner: Optional[Preconditioner] = None,
    tracer: Optional[Tracer] = None,
) -> SolveReport:
    """SIR whose meta-solver is a depth-``plan.srr_depth`` SRR.

    Starts from the sketch-and-solve point ``(SA)†(Sb)``; the preconditioner
    is built once and reused by every outer step.
    """
    A, b = _validate_system(A, b)
    plan = plan or RefinePlan()
    if plan.scheme != SchemeKind.sirr:
        raise InvalidParameterError({"plan.scheme": [f"sirr needs scheme 'sirr', got {plan.scheme.value!r}"]})
    p = preconditioner or build(A, S)
    monitor = _IterationMonitor(SchemeKind.sirr, plan.stop, tracer)
    per_step = 2**plan.srr_depth

    x = sketch_solve(p, S, b)
    calls = 1
    monitor.record(0, x, norm2(x))

    outer = 0
    for i in range(1, plan.outer_limit + 1):
        residual = b - matvec(A, x)
        update = srr(A, matvec_t(A, residual), p, plan.meta, plan.srr_depth)
        calls += per_step
        x = x + update
        outer = i
        update_norm = norm2(update)
        monitor.record(i, x, update_norm)
        if monitor.should_stop(i, x, update_norm):
            break

    report = monitor.report(x, calls, outer)
    logger.debug(
        "sirr finished: outer=%d meta_calls=%d converged=%s diverged=%s",
        outer, calls, report.converged, report.diverged,
    )
    return report
