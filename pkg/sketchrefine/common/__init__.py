"""Common module — constants, exceptions and seeded random streams."""

from sketchrefine.common.constants import (
    DEFAULT_KRYLOV_K,
    DEFAULT_MAX_OUTER,
    DEFAULT_PATIENCE,
    DEFAULT_SRR_DEPTH,
    DEFAULT_UPDATE_TOL,
    UNIT_ROUNDOFF,
    ExperimentName,
    MetaKind,
    SchemeKind,
    SketchKind,
    SolverName,
)
from sketchrefine.common.exceptions import (
    InputFileNotFoundError,
    InvalidParameterError,
    LapackError,
    MatrixMarketParseError,
    PreconditionerFailure,
    RankDeficiencyError,
    ShapeMismatchError,
    SingularTriangularError,
    SketchRefineError,
    SolverDivergenceError,
    SVDConvergenceError,
    UndefinedMetricError,
    problem_detail,
)
from sketchrefine.common.rng import derive_seed, make_rng
