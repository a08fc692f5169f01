"""Build and apply the sketched QR preconditioner."""

from __future__ import annotations

import logging
from typing import Any, Callable, Literal

import numpy as np
import scipy.linalg

from sketchrefine.common.constants import MAX_SKETCH_RESAMPLES, STREAM_SKETCH
from sketchrefine.common.exceptions import (
    InvalidParameterError,
    PreconditionerFailure,
    RankDeficiencyError,
    ShapeMismatchError,
)
from sketchrefine.common.rng import derive_seed
from sketchrefine.la_core.service import (
    apply_qt,
    as_dense_matrix,
    householder_qr,
    singular_values,
    tri_solve,
)
from sketchrefine.precond.schemas import Preconditioner
from sketchrefine.sketch.schemas import SketchOperator
from sketchrefine.sketch.service import apply

logger = logging.getLogger(__name__)


# ── Build ───────────────────────────────────────────────────────────

def build(A: Any, S: SketchOperator) -> Preconditioner:
    """``r`` = R factor of ``householder_qr(S·A)``."""
    A = as_dense_matrix(A, name="A")
    m, n = A.shape
    if S.m != m:
        raise ShapeMismatchError("precond.build", (S.m,), (m,))
    if S.s < n:
        raise InvalidParameterError({"s": [f"sketch rows s={S.s} must be >= n={n}"]})

    try:
        qr = householder_qr(apply(S, A))
    except RankDeficiencyError as exc:
        raise PreconditionerFailure(1, exc.detail) from exc
    return Preconditioner(r=qr.r, source_seed=S.seed, sketch_qr=qr)


def build_with_resampling(
    A: Any,
    sketch_factory: Callable[[int], SketchOperator],
    seed: int,
    max_resamples: int = MAX_SKETCH_RESAMPLES,
) -> tuple[Preconditioner, SketchOperator]:
    """Build from ``sketch_factory(seed)``; on rank deficiency retry with derived seeds."""
    attempt_seed = seed
    last_detail = ""
    for attempt in range(max_resamples + 1):
        S = sketch_factory(attempt_seed)
        try:
            return build(A, S), S
        except PreconditionerFailure as exc:
            last_detail = exc.detail
            logger.warning(
                "Sketch seed %d gave rank-deficient SA (attempt %d/%d): %s",
                attempt_seed, attempt + 1, max_resamples + 1, exc.detail,
            )
            attempt_seed = derive_seed(seed, STREAM_SKETCH, attempt + 1)
    raise PreconditionerFailure(max_resamples + 1, last_detail)


# ── Application ─────────────────────────────────────────────────────

def apply_rinv(p: Preconditioner, v: Any) -> np.ndarray:
    """``r⁻¹·v``."""
    return tri_solve(p.r, v)


def apply_rinv_t(p: Preconditioner, v: Any) -> np.ndarray:
    """``r⁻ᵀ·v``."""
    return tri_solve(p.r, v, transposed=True)


def normal_solve(p: Preconditioner, rA: Any) -> np.ndarray:
    """``(rᵀr)⁻¹·rA`` as two triangular solves; ``rᵀr`` is never formed."""
    return apply_rinv(p, apply_rinv_t(p, rA))


def sketch_solve(p: Preconditioner, S: SketchOperator, b: Any) -> np.ndarray:
    """Sketch-and-solve point ``(SA)†(Sb) = r⁻¹·Qₛᵀ·S·b``."""
    if p.sketch_qr is None:
        raise InvalidParameterError({"p": ["preconditioner was built without its sketch QR"]})
    return tri_solve(p.r, apply_qt(p.sketch_qr, apply(S, b)))


# ── Diagnostics ─────────────────────────────────────────────────────

def whitened_singular_values(
    A: Any,
    p: Preconditioner,
    method: Literal["explicit", "generalized"] = "explicit",
) -> np.ndarray:
    """Singular values of ``A·r⁻¹``, nonincreasing.

    ``generalized`` solves the pencil ``(AᵀA, rᵀr)`` and squares the
    conditioning of A; use it only as a cross-check on moderate κ.
    """
    A = as_dense_matrix(A, name="A")
    if method == "explicit":
        whitened = tri_solve(p.r, A.T, transposed=True).T
        return singular_values(whitened)
    if method == "generalized":
        eig = scipy.linalg.eigh(A.T @ A, p.r.T @ p.r, eigvals_only=True)
        return np.sqrt(np.clip(eig, 0.0, None))[::-1]
    raise InvalidParameterError({"method": [f"unknown method {method!r}"]})
