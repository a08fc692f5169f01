"""Experiment specs, result rows and run summaries."""

from __future__ import annotations

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from sketchrefine.common.constants import (
    DEFAULT_MAX_OUTER,
    DEFAULT_SRR_DEPTH,
    DEFAULT_SRR_STANDALONE_DEPTH,
    ExperimentName,
    SketchKind,
    SolverName,
)
from sketchrefine.meta_solvers.schemas import MetaConfig


# ── Experiment spec ─────────────────────────────────────────────────

class ExperimentSpec(BaseModel):
    """One experiment grid.

    ``n_values`` holds a single n except for the n-scale run. A positive
    ``s`` fixes the sketch size; with ``s = 0`` every n is paired with
    ``s = round(ratio·n)`` for each of ``s_ratios``. When ``levels`` is set,
    the (κ, β) cells are the difficulty sweep ``κ = d, β = u·d`` instead of
    the ``kappas × betas`` product.
    """

    model_config = ConfigDict(frozen=True)

    name: ExperimentName
    m: int = Field(ge=2)
    n_values: List[int] = Field(min_length=1)
    s: int = Field(default=0, ge=0)
    s_ratios: Optional[List[float]] = None
    kappas: List[float] = Field(default_factory=lambda: [1.0])
    betas: List[float] = Field(default_factory=lambda: [0.0])
    levels: Optional[int] = None
    seeds: int = Field(default=1, ge=1)
    repeats: int = Field(default=1, ge=1)
    solvers: List[SolverName] = Field(min_length=1)

    sketch: SketchKind = SketchKind.sparse_sign
    zeta: Optional[int] = None
    meta: MetaConfig = MetaConfig()
    srr_depth: int = Field(default=DEFAULT_SRR_DEPTH, ge=0)
    srr_standalone_depth: int = Field(default=DEFAULT_SRR_STANDALONE_DEPTH, ge=0)
    max_outer: int = Field(default=DEFAULT_MAX_OUTER, ge=1)

    master_seed: int = 0
    threads: int = Field(default=1, ge=1)
    out: str = "results.csv"
    trace: bool = False
    failure_threshold: Optional[float] = None
    substitutions: List[str] = []


class InstanceJob(BaseModel):
    """A single (problem, sketch draw) unit of work; all solvers run on it."""

    model_config = ConfigDict(frozen=True)

    m: int
    n: int
    s: int
    kappa: float
    beta: float
    problem_seed: int
    sketch_seed: int


# ── Results ─────────────────────────────────────────────────────────

class ResultRow(BaseModel):
    """One CSV row: a solver on an instance at a recorded iteration.

    ``seed`` is the sketch seed of the run; error fields are NaN when a
    metric is undefined or the solver failed.
    """

    model_config = ConfigDict(frozen=True)

    experiment: ExperimentName
    solver: SolverName
    m: int
    n: int
    s: int
    kappa: float
    beta: float
    seed: int
    iteration: int
    forward_err: float
    residual_err: float
    backward_kw: float
    meta_calls: int
    wall_time_s: float
    converged: bool
    failed: bool


class FailureSummary(BaseModel):
    solver: SolverName
    m: int
    n: int
    s: int
    kappa: float
    beta: float
    runs: int
    failures: int

    @property
    def rate(self) -> float:
        return self.failures / self.runs if self.runs else 0.0


class RunSummary(BaseModel):
    experiment: ExperimentName
    out: str
    instances_run: int = 0
    instances_skipped: int = 0
    rows_written: int = 0
    failed_rows: int = 0
    extras: Dict[str, float] = {}


class SolveOutcome(BaseModel):
    """What ``solve`` reports for a file-based system."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    solver: SolverName
    out: str
    iterations: int
    meta_calls: int
    backward_kw: float
    converged: bool
    diverged: bool
    wall_time_s: float
