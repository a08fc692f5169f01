"""Refinement plans and solve reports."""

from __future__ import annotations

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sketchrefine.common.constants import (
    DEFAULT_MAX_OUTER,
    DEFAULT_PATIENCE,
    DEFAULT_SRR_DEPTH,
    DEFAULT_UPDATE_TOL,
    SchemeKind,
)
from sketchrefine.la_core.schemas import Vector
from sketchrefine.meta_solvers.schemas import MetaConfig


class StopRule(BaseModel):
    """Stop once ``‖update‖ ≤ update_tol·‖x̂‖`` for *patience* consecutive steps."""

    model_config = ConfigDict(frozen=True)

    max_outer: int = Field(default=DEFAULT_MAX_OUTER, ge=1)
    update_tol: float = Field(default=DEFAULT_UPDATE_TOL, gt=0.0)
    patience: int = Field(default=DEFAULT_PATIENCE, ge=1)


class RefinePlan(BaseModel):
    """Scheme + bounds.

    SIR uses ``n_outer``; SRR uses ``srr_depth`` as its depth; SIRR uses both.
    The outer loop runs ``min(n_outer, stop.max_outer)`` steps at most.
    """

    model_config = ConfigDict(frozen=True)

    scheme: SchemeKind = SchemeKind.sirr
    n_outer: int = Field(default=DEFAULT_MAX_OUTER, ge=0)
    srr_depth: int = Field(default=DEFAULT_SRR_DEPTH, ge=0)
    meta: MetaConfig = MetaConfig()
    stop: StopRule = StopRule()

    @property
    def outer_limit(self) -> int:
        return min(self.n_outer, self.stop.max_outer)


class IterationRecord(BaseModel):
    """One recorded iterate; error fields stay None without a tracer."""

    model_config = ConfigDict(frozen=True)

    iteration: int
    update_norm: float
    forward_err: Optional[float] = None
    residual_err: Optional[float] = None
    kw_backward_err: Optional[float] = None


class SolveReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scheme: SchemeKind
    x_hat: Vector
    iterates: List[IterationRecord] = []
    converged: bool = False
    diverged: bool = False
    meta_calls: int = 0
    outer_iterations: int = 0
    wall_time: float = 0.0

    @property
    def final(self) -> Optional[IterationRecord]:
        return self.iterates[-1] if self.iterates else None

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x_hat)))
