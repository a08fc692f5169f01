"""Dense kernels every solver module builds on.

All routines are pure functions of their inputs. Matrices are float64 numpy
arrays stored column-major; LAPACK does the heavy lifting through
``scipy.linalg``.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from sketchrefine.common.constants import UNIT_ROUNDOFF
from sketchrefine.common.exceptions import (
    InvalidParameterError,
    LapackError,
    RankDeficiencyError,
    ShapeMismatchError,
    SingularTriangularError,
    SVDConvergenceError,
)
from sketchrefine.la_core.schemas import DenseMatrix, QRFactors, SVDFactors, Vector


# ── Validation ──────────────────────────────────────────────────────

def as_dense_matrix(data: Any, *, name: str = "M") -> DenseMatrix:
    """Coerce *data* to a finite column-major float64 matrix."""
    arr = np.asfortranarray(np.asarray(data, dtype=np.float64))
    if arr.ndim != 2:
        raise InvalidParameterError({name: [f"expected a 2-D matrix, got ndim={arr.ndim}"]})
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError({name: ["matrix contains NaN or Inf entries"]})
    return arr


def as_vector(data: Any, *, length: Optional[int] = None, name: str = "v") -> Vector:
    """Coerce *data* to a 1-D float64 vector, optionally of a fixed length."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise InvalidParameterError({name: [f"expected a vector, got shape {arr.shape}"]})
    if length is not None and arr.shape[0] != length:
        raise ShapeMismatchError(name, (length,), arr.shape)
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError({name: ["vector contains NaN or Inf entries"]})
    return arr


# ── Householder QR ──────────────────────────────────────────────────

def householder_qr(M: Any, *, check_rank: bool = True) -> QRFactors:
    """Householder QR with nonnegative ``diag(R)``.

    Raises ``RankDeficiencyError`` when any ``|R_ii| < n·u·‖M‖`` unless
    *check_rank* is False (the direct baseline only wants the factors).
    """
    M = as_dense_matrix(M)
    m, n = M.shape
    if m < n:
        raise InvalidParameterError({"M": [f"householder_qr needs rows >= cols, got {m}x{n}"]})

    (h, tau), r = scipy.linalg.qr(M, mode="raw", check_finite=False)
    diag = np.diag(r)
    signs = np.where(diag < 0, -1.0, 1.0)
    # triu after scaling keeps the strict lower part at +0.0
    r = np.asfortranarray(np.triu(signs[:, None] * r))

    norm = float(scipy.linalg.svdvals(r, check_finite=False)[0]) if n else 0.0
    factors = QRFactors(
        reflectors=np.asfortranarray(h),
        tau=np.asarray(tau, dtype=np.float64),
        signs=signs,
        r=r,
        norm_estimate=norm,
    )
    if check_rank and n:
        threshold = n * UNIT_ROUNDOFF * norm
        if factors.min_abs_diag < threshold or norm == 0.0:
            raise RankDeficiencyError(factors.min_abs_diag, threshold)
    return factors


def _ormqr(factors: QRFactors, c: DenseMatrix, trans: str) -> DenseMatrix:
    (ormqr,) = lapack.get_lapack_funcs(("ormqr",), (factors.reflectors,))
    lwork = max(1, 64 * c.shape[1], 64 * factors.cols)
    cq, _, info = ormqr("L", trans, factors.reflectors, factors.tau, c, lwork)
    if info != 0:
        raise LapackError("ormqr", info)
    return cq


def apply_qt(factors: QRFactors, y: Any) -> np.ndarray:
    """Thin ``Qᵀ·y`` (n rows) for an m-vector or m×k block."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.shape[0] != factors.rows:
        raise ShapeMismatchError("apply_qt", (factors.rows,), arr.shape)
    if factors.cols == 0:
        return np.zeros((0,) + arr.shape[1:])
    c = np.asfortranarray(arr.reshape(factors.rows, -1)).copy()
    out = _ormqr(factors, c, "T")[: factors.cols] * factors.signs[:, None]
    return out.reshape(-1) if arr.ndim == 1 else np.asfortranarray(out)


def apply_q(factors: QRFactors, z: Any) -> np.ndarray:
    """Thin ``Q·z`` (m rows) for an n-vector or n×k block."""
    arr = np.asarray(z, dtype=np.float64)
    if arr.shape[0] != factors.cols:
        raise ShapeMismatchError("apply_q", (factors.cols,), arr.shape)
    block = arr.reshape(factors.cols, -1)
    c = np.zeros((factors.rows, block.shape[1]), order="F")
    c[: factors.cols] = factors.signs[:, None] * block
    out = _ormqr(factors, c, "N")
    return out.reshape(-1) if arr.ndim == 1 else out


def explicit_q(factors: QRFactors) -> DenseMatrix:
    """Materialize the thin orthonormal factor (m×n)."""
    (orgqr,) = lapack.get_lapack_funcs(("orgqr",), (factors.reflectors,))
    q, _, info = orgqr(factors.reflectors.copy(order="F"), factors.tau)
    if info != 0:
        raise LapackError("orgqr", info)
    return np.asfortranarray(q[:, : factors.cols] * factors.signs[None, :])


# ── Triangular solves ───────────────────────────────────────────────

def tri_solve(r: Any, y: Any, transposed: bool = False) -> np.ndarray:
    """Solve ``r·z = y`` (or ``rᵀ·z = y``) for upper-triangular *r*."""
    r = np.asarray(r, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = r.shape[0]
    if r.ndim != 2 or r.shape[1] != n:
        raise ShapeMismatchError("tri_solve", "square r", r.shape)
    if y.shape[0] != n:
        raise ShapeMismatchError("tri_solve", (n,), y.shape)
    zero = np.flatnonzero(np.diag(r) == 0.0)
    if zero.size:
        raise SingularTriangularError(int(zero[0]))
    return scipy.linalg.solve_triangular(
        r, y, trans="T" if transposed else "N", lower=False, check_finite=False,
    )


# ── SVD ─────────────────────────────────────────────────────────────

def thin_svd(M: Any) -> SVDFactors:
    """Thin SVD via LAPACK ``gesdd``, falling back to ``gesvd``."""
    M = as_dense_matrix(M)
    m, n = M.shape
    if m < n:
        raise InvalidParameterError({"M": [f"thin_svd needs rows >= cols, got {m}x{n}"]})
    try:
        u, s, vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(M, full_matrices=False, lapack_driver="gesvd", check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SVDConvergenceError(M.shape, str(exc)) from exc
    return SVDFactors(u=np.asfortranarray(u), sigma=s, v=np.asfortranarray(vt.T))


def singular_values(M: Any) -> Vector:
    """Singular values only, nonincreasing."""
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return np.zeros(0)
    try:
        return scipy.linalg.svdvals(M, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SVDConvergenceError(M.shape, str(exc)) from exc


# ── Products and norms ──────────────────────────────────────────────

def matvec(M: np.ndarray, v: Any) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if M.shape[1] != v.shape[0]:
        raise ShapeMismatchError("matvec", (M.shape[1],), v.shape)
    return M @ v


def matvec_t(M: np.ndarray, v: Any) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if M.shape[0] != v.shape[0]:
        raise ShapeMismatchError("matvec_t", (M.shape[0],), v.shape)
    return M.T @ v


def normal_matvec(M: np.ndarray, v: Any) -> np.ndarray:
    """``MᵀM·v`` as two matvecs; the Gram matrix is never formed."""
    return matvec_t(M, matvec(M, v))


def norm2(v: Any) -> float:
    return float(scipy.linalg.norm(np.asarray(v, dtype=np.float64), check_finite=False))


def spectral_norm(M: Any) -> float:
    """Largest singular value."""
    sigma = singular_values(M)
    return float(sigma[0]) if sigma.size else 0.0
