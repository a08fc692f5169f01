"""Error metrics and reference levels.

Metrics run in the harness, never in the solver path: the backward-error
estimate needs the thin SVD of A, computed once per problem and shared.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Optional

import numpy as np

from sketchrefine.common.constants import UNIT_ROUNDOFF
from sketchrefine.common.exceptions import InvalidParameterError, ShapeMismatchError, UndefinedMetricError
from sketchrefine.la_core.schemas import SVDFactors
from sketchrefine.la_core.service import apply_qt, householder_qr, matvec, norm2, tri_solve
from sketchrefine.metrics.schemas import ErrorTriple, WedinFloor

logger = logging.getLogger(__name__)


def forward_error(x_hat: Any, x_star: Any) -> float:
    """``‖x* − x̂‖ / ‖x*‖``."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_hat.shape != x_star.shape:
        raise ShapeMismatchError("forward_error", x_star.shape, x_hat.shape)
    denom = norm2(x_star)
    if denom == 0.0:
        raise UndefinedMetricError("forward_error", "‖x*‖ = 0")
    return norm2(x_star - x_hat) / denom


def residual_error(A: np.ndarray, b: Any, x_hat: Any, x_star: Any) -> float:
    """``‖A(x* − x̂)‖ / ‖b − A·x*‖``."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    denom = norm2(np.asarray(b, dtype=np.float64) - matvec(A, x_star))
    if denom == 0.0:
        raise UndefinedMetricError("residual_error", "optimal residual is zero")
    return norm2(matvec(A, x_star - x_hat)) / denom


def kw_backward_error(svd_A: SVDFactors, b: Any, x_hat: Any, theta: float = 1.0) -> float:
    """Karlson–Waldén estimate of the least-squares backward error.

    With ``r̂ = b − A·x̂`` and ``μ = θ²‖r̂‖²/(1 + θ²‖x̂‖²)``::

        BÊ = θ/√(1 + θ²‖x̂‖²) · √( Σ σ_i²(u_iᵀr̂)² / (σ_i² + μ) )

    and ``BÊ ≤ BE ≤ √2·BÊ``.
    """
    if theta <= 0.0:
        raise InvalidParameterError({"theta": [f"theta must be > 0, got {theta}"]})
    x_hat = np.asarray(x_hat, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sigma = svd_A.sigma

    a_x = svd_A.u @ (sigma * (svd_A.v.T @ x_hat))
    r_hat = b - a_x
    x_norm2 = float(x_hat @ x_hat)
    mu = theta**2 * float(r_hat @ r_hat) / (1.0 + theta**2 * x_norm2)

    coeffs = svd_A.u.T @ r_hat
    sigma2 = sigma**2
    denom = sigma2 + mu
    terms = np.divide(sigma2 * coeffs**2, denom, out=np.zeros_like(denom), where=denom > 0)
    return theta / math.sqrt(1.0 + theta**2 * x_norm2) * math.sqrt(float(terms.sum()))


def wedin_floor(norm_A: float, kappa: float, x_star_norm: float, r_star_norm: float) -> WedinFloor:
    """``u·(κ‖x*‖ + κ²‖r*‖/‖A‖)`` and ``u·(κ‖r*‖ + ‖A‖‖x*‖)``."""
    if kappa < 1.0:
        raise InvalidParameterError({"kappa": [f"kappa must be >= 1, got {kappa}"]})
    u = UNIT_ROUNDOFF
    return WedinFloor(
        forward_floor=u * (kappa * x_star_norm + kappa**2 * r_star_norm / norm_A),
        residual_floor=u * (kappa * r_star_norm + norm_A * x_star_norm),
    )


def forward_stability_bound(
    n: int, kappa: float, norm_A: float, x_star_norm: float, r_star_norm: float, constant: float = 100.0,
) -> float:
    """``C·n^{3/2}·(uκ‖x*‖ + uκ²‖r*‖/‖A‖)``, the strong forward-stability envelope."""
    return constant * n**1.5 * wedin_floor(norm_A, kappa, x_star_norm, r_star_norm).forward_floor


# ── Baseline + evaluation ───────────────────────────────────────────

def qr_direct_solve(A: np.ndarray, b: Any) -> np.ndarray:
    """Householder QR of A + back-substitution; rank deficiency only warns."""
    qr = householder_qr(A, check_rank=False)
    threshold = qr.cols * UNIT_ROUNDOFF * qr.norm_estimate
    if qr.min_abs_diag < threshold:
        logger.warning("qr_direct: A is numerically rank deficient (min |R_ii|=%.3e)", qr.min_abs_diag)
    return tri_solve(qr.r, apply_qt(qr, np.asarray(b, dtype=np.float64)))


def evaluate(
    A: np.ndarray,
    b: Any,
    svd_A: SVDFactors,
    x_hat: Any,
    x_star: Any,
    theta: float = 1.0,
) -> ErrorTriple:
    """All three metrics; residual is NaN when the optimal residual vanishes."""
    try:
        residual = residual_error(A, b, x_hat, x_star)
    except UndefinedMetricError:
        residual = math.nan
    return ErrorTriple(
        forward=forward_error(x_hat, x_star),
        residual=residual,
        backward_kw=kw_backward_error(svd_A, b, x_hat, theta),
    )


def make_tracer(
    A: np.ndarray,
    b: Any,
    svd_A: SVDFactors,
    x_star: Optional[Any],
) -> Callable[[np.ndarray], ErrorTriple]:
    """Per-iterate evaluator for the refine drivers.

    Without a planted solution only the backward estimate is meaningful;
    forward and residual are then NaN.
    """
    def _trace(x_hat: np.ndarray) -> ErrorTriple:
        if x_star is None:
            return ErrorTriple(
                forward=math.nan, residual=math.nan, backward_kw=kw_backward_error(svd_A, b, x_hat),
            )
        return evaluate(A, b, svd_A, x_hat, x_star)

    return _trace
