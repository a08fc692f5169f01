"""Construction and application of random embeddings ``S ∈ R^{s×m}``."""

from __future__ import annotations

import logging
import math
from typing import Any, Optional

import numpy as np
import scipy.sparse

from sketchrefine.common.constants import SketchKind
from sketchrefine.common.exceptions import InvalidParameterError, ShapeMismatchError
from sketchrefine.common.rng import make_rng
from sketchrefine.la_core.service import explicit_q, householder_qr, singular_values
from sketchrefine.sketch.schemas import SketchOperator

logger = logging.getLogger(__name__)


def default_zeta(n: int, s: int) -> int:
    """Nonzeros per column: ``ceil(2·log2(n))`` clipped to ``[1, s]``."""
    zeta = math.ceil(2 * math.log2(n)) if n > 1 else 1
    return max(1, min(s, zeta))


# ── Sparse sign ─────────────────────────────────────────────────────

def make_sparse_sign(s: int, m: int, zeta: int, seed: int) -> SketchOperator:
    """Sparse sign embedding: each column has *zeta* distinct rows valued ±1/√zeta."""
    errors: dict[str, list[str]] = {}
    if s < 1:
        errors["s"] = [f"s must be >= 1, got {s}"]
    if m < 1:
        errors["m"] = [f"m must be >= 1, got {m}"]
    if zeta < 1 or zeta > s:
        errors["zeta"] = [f"need 1 <= zeta <= s, got zeta={zeta}, s={s}"]
    if errors:
        raise InvalidParameterError(errors)

    rng = make_rng(seed)

    # Floyd's sampling, vectorized over the m columns
    rows = np.empty((m, zeta), dtype=np.int64)
    for t, j in enumerate(range(s - zeta, s)):
        draw = rng.integers(0, j + 1, size=m)
        if t:
            taken = (rows[:, :t] == draw[:, None]).any(axis=1)
            draw = np.where(taken, j, draw)
        rows[:, t] = draw
    rows.sort(axis=1)

    signs = rng.integers(0, 2, size=(m, zeta)).astype(np.float64) * 2.0 - 1.0
    data = signs / math.sqrt(zeta)
    indptr = np.arange(0, m * zeta + 1, zeta, dtype=np.int64)
    payload = scipy.sparse.csc_matrix((data.ravel(), rows.ravel(), indptr), shape=(s, m))

    return SketchOperator(
        kind=SketchKind.sparse_sign, s=s, m=m, zeta=zeta, seed=seed, payload=payload,
    )


def identity_sketch(m: int) -> SketchOperator:
    """The exact isometry ``S = I_m`` as a one-nonzero-per-column sparse sign."""
    payload = scipy.sparse.identity(m, dtype=np.float64, format="csc")
    return SketchOperator(kind=SketchKind.sparse_sign, s=m, m=m, zeta=1, seed=0, payload=payload)


# ── Gaussian ────────────────────────────────────────────────────────

def make_gaussian(s: int, m: int, seed: int) -> SketchOperator:
    """Dense embedding with i.i.d. ``N(0, 1/s)`` entries."""
    if s < 1 or s > m:
        raise InvalidParameterError({"s": [f"need 1 <= s <= m, got s={s}, m={m}"]})
    rng = make_rng(seed)
    payload = np.asfortranarray(rng.standard_normal((s, m)) / math.sqrt(s))
    return SketchOperator(kind=SketchKind.gaussian, s=s, m=m, seed=seed, payload=payload)


def make_sketch(
    kind: SketchKind,
    s: int,
    m: int,
    seed: int,
    *,
    n: int = 1,
    zeta: Optional[int] = None,
) -> SketchOperator:
    """Dispatch on *kind*; a missing *zeta* falls back to :func:`default_zeta`."""
    if SketchKind(kind) == SketchKind.gaussian:
        return make_gaussian(s, m, seed)
    return make_sparse_sign(s, m, zeta or default_zeta(n, s), seed)


# ── Application ─────────────────────────────────────────────────────

def apply(S: SketchOperator, M: Any) -> np.ndarray:
    """``S·M`` for an m-vector or m×k matrix; sparse kind costs O(zeta·m·k)."""
    M = np.asarray(M, dtype=np.float64)
    if M.shape[0] != S.m:
        raise ShapeMismatchError("sketch.apply", (S.m,), M.shape)
    out = S.payload @ M
    out = np.asarray(out, dtype=np.float64)
    return np.asfortranarray(out) if out.ndim == 2 else out


def measure_distortion(S: SketchOperator, A: Any) -> float:
    """Distortion η of *S* on range(A): ``max(σ_max(S·Q_A) − 1, 1 − σ_min(S·Q_A))``."""
    q = explicit_q(householder_qr(A))
    sigma = singular_values(apply(S, q))
    eta = float(max(sigma[0] - 1.0, 1.0 - sigma[-1]))
    logger.debug("distortion of %s sketch (s=%d): eta=%.3f", S.kind.value, S.s, eta)
    return eta
