"""Custom exceptions and RFC 7807-style problem details for CLI error output."""

from __future__ import annotations

from typing import Any, Optional

from sketchrefine.common.constants import EXIT_SOLVER_FAILURE, EXIT_USAGE

BASE_ERROR_URI = "urn:sketchrefine:error"


# ── Exception hierarchy ─────────────────────────────────────────────

class SketchRefineError(Exception):
    """Base for all library exceptions → problem-detail dict + exit code."""

    def __init__(
        self,
        exit_code: int,
        error_type: str,
        title: str,
        detail: str,
        errors: Optional[dict[str, Any]] = None,
    ) -> None:
        self.exit_code = exit_code
        self.error_type = error_type
        self.title = title
        self.detail = detail
        self.errors = errors
        super().__init__(detail)


class InvalidParameterError(SketchRefineError):
    """Parameter outside its documented domain."""

    def __init__(self, errors: dict[str, list[str]]) -> None:
        names = ", ".join(sorted(errors))
        super().__init__(
            exit_code=EXIT_USAGE,
            error_type="invalid-parameter",
            title="Invalid Parameter",
            detail=f"Invalid value for: {names}.",
            errors=errors,
        )


class ShapeMismatchError(SketchRefineError):
    """Operands whose dimensions do not conform."""

    def __init__(self, operation: str, expected: Any, actual: Any) -> None:
        super().__init__(
            exit_code=EXIT_USAGE,
            error_type="shape-mismatch",
            title="Shape Mismatch",
            detail=f"{operation}: expected {expected}, got {actual}.",
        )


class InputFileNotFoundError(SketchRefineError):
    def __init__(self, path: str) -> None:
        self.path = path
        super().__init__(
            exit_code=EXIT_USAGE,
            error_type="file-not-found",
            title="File Not Found",
            detail=f"Input file '{path}' does not exist.",
        )


class MatrixMarketParseError(SketchRefineError):
    """Malformed MatrixMarket input; *line* is 1-based when known."""

    def __init__(self, path: str, reason: str, line: Optional[int] = None) -> None:
        where = f"{path}:{line}" if line is not None else path
        self.path = path
        self.line = line
        super().__init__(
            exit_code=EXIT_USAGE,
            error_type="matrix-market-parse",
            title="MatrixMarket Parse Error",
            detail=f"{where}: {reason}",
        )


class RankDeficiencyError(SketchRefineError):
    def __init__(self, min_diag: float, threshold: float) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="rank-deficient",
            title="Rank Deficient",
            detail=f"min |R_ii| = {min_diag:.3e} below threshold {threshold:.3e}.",
        )


class SingularTriangularError(SketchRefineError):
    def __init__(self, index: int) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="singular-triangular",
            title="Singular Triangular Matrix",
            detail=f"Zero diagonal entry at position {index}.",
        )


class SVDConvergenceError(SketchRefineError):
    def __init__(self, shape: tuple[int, ...], reason: str) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="svd-no-convergence",
            title="SVD Did Not Converge",
            detail=f"SVD of {shape[0]}x{shape[1]} matrix failed: {reason}",
        )


class LapackError(SketchRefineError):
    def __init__(self, routine: str, info: int) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="lapack",
            title="LAPACK Error",
            detail=f"{routine} returned info={info}.",
        )


class PreconditionerFailure(SketchRefineError):
    """Sketched matrix SA rank-deficient after every allowed resample."""

    def __init__(self, attempts: int, detail: str) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="preconditioner-failure",
            title="Preconditioner Failure",
            detail=f"Failed after {attempts} sketch(es): {detail}",
        )


class UndefinedMetricError(SketchRefineError):
    def __init__(self, metric: str, reason: str) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="undefined-metric",
            title="Undefined Metric",
            detail=f"{metric} is undefined: {reason}",
        )


class SolverDivergenceError(SketchRefineError):
    def __init__(self, scheme: str, iteration: int) -> None:
        super().__init__(
            exit_code=EXIT_SOLVER_FAILURE,
            error_type="divergence",
            title="Solver Diverged",
            detail=f"{scheme} diverged at outer iteration {iteration}.",
        )


# ── Problem-detail builder ──────────────────────────────────────────

def problem_detail(exc: SketchRefineError, instance: str = "") -> dict[str, Any]:
    body: dict[str, Any] = {
        "type": f"{BASE_ERROR_URI}:{exc.error_type}",
        "title": exc.title,
        "status": exc.exit_code,
        "detail": exc.detail,
        "instance": instance,
    }
    if exc.errors:
        body["errors"] = exc.errors
    return body
