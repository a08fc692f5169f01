"""Enums and numeric defaults shared across the solver and the bench harness."""

from __future__ import annotations

import enum

import numpy as np


# ── Floating point ──────────────────────────────────────────────────

UNIT_ROUNDOFF: float = float(np.finfo(np.float64).eps)


# ── Sketching ───────────────────────────────────────────────────────

class SketchKind(str, enum.Enum):
    sparse_sign = "sparse_sign"
    gaussian = "gaussian"


MAX_SKETCH_RESAMPLES = 3


# ── Meta-solvers / refinement ───────────────────────────────────────

class MetaKind(str, enum.Enum):
    sketch_solve = "sketch"
    krylov = "krylov"


class SchemeKind(str, enum.Enum):
    sir = "sir"
    srr = "srr"
    sirr = "sirr"


DEFAULT_KRYLOV_K = 2
DEFAULT_SRR_DEPTH = 4
DEFAULT_SRR_STANDALONE_DEPTH = 6
DEFAULT_MAX_OUTER = 50
DEFAULT_PATIENCE = 2
DEFAULT_UPDATE_TOL = 4 * UNIT_ROUNDOFF

# update norm growing DIVERGENCE_GROWTH× across DIVERGENCE_WINDOW steps, past the
# first correction and ‖x̂‖
DIVERGENCE_GROWTH = 10.0
DIVERGENCE_WINDOW = 3


# ── Bench harness ───────────────────────────────────────────────────

class SolverName(str, enum.Enum):
    sirr = "sirr"
    sir = "sir"
    srr = "srr"
    qr_direct = "qr_direct"


class ExperimentName(str, enum.Enum):
    convergence = "convergence"
    sweep = "sweep"
    residual_size = "residual_size"
    failrate = "failrate"
    nscale = "nscale"
    solve = "solve"


CSV_SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = ".17g"

# relative residual error above which a failrate run counts as failed
FAILRATE_THRESHOLD = 1e-5

DIFFICULTY_MIN_EXP = 0
DIFFICULTY_MAX_EXP = 16

# seed streams derived from the master seed
STREAM_PROBLEM = 0
STREAM_SKETCH = 1

# ── Exit codes ──────────────────────────────────────────────────────

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_USAGE = 2
