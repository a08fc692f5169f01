"""Meta-solvers: sketch-and-solve and the k-step Krylov enhancement.

Two calling conventions meet here. ``meta_residual`` takes an m-residual r
(what SIR hands over); ``meta_normal`` takes a normal-equation right-hand
side z = Aᵀr (what every SRR level hands over). For sketch-and-solve both
reduce to ``(RᵀR)⁻¹·Aᵀr``. The Krylov kind builds the span of iterative
sketching steps and combines it by a small Householder least-squares solve:
against r in the m-residual form, against ``R⁻ᵀ(z − AᵀA·Y·a)`` in the
normal form.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from sketchrefine.common.constants import UNIT_ROUNDOFF, MetaKind
from sketchrefine.la_core.service import (
    apply_qt,
    householder_qr,
    matvec,
    matvec_t,
    normal_matvec,
    spectral_norm,
    tri_solve,
)
from sketchrefine.meta_solvers.schemas import MetaConfig
from sketchrefine.precond.schemas import Preconditioner
from sketchrefine.precond.service import apply_rinv_t, normal_solve, whitened_singular_values


# ── Sketch-and-solve ────────────────────────────────────────────────

def sketch_solve_meta(A: np.ndarray, p: Preconditioner, rA: Any) -> np.ndarray:
    """``(RᵀR)⁻¹·rA``; the iteration matrix is ``T = (AᵀSᵀSA)⁻¹``."""
    return normal_solve(p, rA)


# ── Krylov ──────────────────────────────────────────────────────────

def _galerkin_combine(image: np.ndarray, target: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``basis·a`` with ``a = argmin ‖image·a − target‖``.

    Columns whose ``|R_jj| < cols·u·‖image‖`` are dropped and the reduced
    problem refactored until every kept column is resolved.
    """
    rows, cols = image.shape
    norm = spectral_norm(image)
    if norm == 0.0:
        return np.zeros(basis.shape[0])

    tol = cols * UNIT_ROUNDOFF * norm
    keep = np.arange(min(rows, cols))
    while keep.size:
        qr = householder_qr(image[:, keep], check_rank=False)
        small = np.abs(np.diag(qr.r)) < tol
        if not small.any():
            coeffs = tri_solve(qr.r, apply_qt(qr, target))
            return basis[:, keep] @ coeffs
        keep = keep[~small]
    return np.zeros(basis.shape[0])


def krylov_meta(A: np.ndarray, p: Preconditioner, r: Any, k: int) -> np.ndarray:
    """k-step Krylov meta on an m-residual *r*.

    ``y₀ = (RᵀR)⁻¹Aᵀr``, ``y_{i+1} = y_i + (RᵀR)⁻¹Aᵀ(r − A·y_i)``, then
    ``Y·a`` with ``a = (A·Y)†r``.
    """
    r = np.asarray(r, dtype=np.float64)
    y = normal_solve(p, matvec_t(A, r))
    basis = [y]
    for _ in range(k):
        y = y + normal_solve(p, matvec_t(A, r - matvec(A, y)))
        basis.append(y)
    Y = np.column_stack(basis)
    return _galerkin_combine(A @ Y, r, Y)


def krylov_meta_normal(A: np.ndarray, p: Preconditioner, z: Any, k: int) -> np.ndarray:
    """k-step Krylov meta on a normal-equation right-hand side *z* (length n).

    Same span as :func:`krylov_meta` with ``Aᵀr`` replaced by *z*; the
    combine minimizes ``‖R⁻ᵀ(z − AᵀA·Y·a)‖``.
    """
    z = np.asarray(z, dtype=np.float64)
    y = normal_solve(p, z)
    basis = [y]
    for _ in range(k):
        y = y + normal_solve(p, z - normal_matvec(A, y))
        basis.append(y)
    Y = np.column_stack(basis)
    image = apply_rinv_t(p, A.T @ (A @ Y))
    return _galerkin_combine(image, apply_rinv_t(p, z), Y)


# ── Dispatch ────────────────────────────────────────────────────────

def meta_residual(config: MetaConfig, A: np.ndarray, p: Preconditioner, r: Any) -> np.ndarray:
    """Apply the configured meta-solver to an m-residual."""
    if config.kind == MetaKind.krylov:
        return krylov_meta(A, p, r, config.k)
    return sketch_solve_meta(A, p, matvec_t(A, np.asarray(r, dtype=np.float64)))


def meta_normal(config: MetaConfig, A: np.ndarray, p: Preconditioner, z: Any) -> np.ndarray:
    """Apply the configured meta-solver to a normal-equation right-hand side."""
    if config.kind == MetaKind.krylov:
        return krylov_meta_normal(A, p, z, config.k)
    return sketch_solve_meta(A, p, z)


# ── Convergence diagnostics ─────────────────────────────────────────

def sketch_solve_contraction(A: Any, p: Preconditioner) -> float:
    """Spectral radius of ``I − (RᵀR)⁻¹AᵀA``; SIR/SRR with sketch-solve converge iff < 1."""
    sigma = whitened_singular_values(A, p)
    return float(np.max(np.abs(1.0 - sigma**2)))


def predicted_contraction(eta: float, config: MetaConfig) -> float:
    """Per-step rate law for distortion *eta*.

    Sketch-and-solve: ``1/(1−η)² − 1`` (infinite for η ≥ 1).
    Krylov: ``min(η^k, η^{−k})``.
    """
    if config.kind == MetaKind.krylov:
        if eta <= 0.0:
            return 0.0
        return min(eta**config.k, eta ** (-config.k))
    if eta >= 1.0:
        return math.inf
    return 1.0 / (1.0 - eta) ** 2 - 1.0
