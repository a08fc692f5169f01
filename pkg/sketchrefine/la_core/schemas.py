"""Factorization containers for the dense kernels."""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

# Column-major float64 array; vectors are 1-D float64 arrays.
DenseMatrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]


class QRFactors(BaseModel):
    """Householder QR with implicit Q.

    ``reflectors`` and ``tau`` are the LAPACK ``geqrf`` packing; ``signs``
    holds the ±1 column scaling that makes ``diag(r)`` nonnegative, so the
    represented factorization is ``M = (Q_lapack · diag(signs)) · r``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    reflectors: DenseMatrix
    tau: Vector
    signs: Vector
    r: DenseMatrix
    norm_estimate: float

    @property
    def rows(self) -> int:
        return int(self.reflectors.shape[0])

    @property
    def cols(self) -> int:
        return int(self.r.shape[0])

    @property
    def min_abs_diag(self) -> float:
        return float(np.min(np.abs(np.diag(self.r)))) if self.cols else 0.0


class SVDFactors(BaseModel):
    """Thin SVD ``M = u · diag(sigma) · vᵀ`` with sigma nonincreasing."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    u: DenseMatrix
    sigma: Vector
    v: DenseMatrix

    @property
    def norm(self) -> float:
        return float(self.sigma[0]) if self.sigma.size else 0.0

    @property
    def condition_number(self) -> float:
        if not self.sigma.size or self.sigma[-1] == 0:
            return float("inf")
        return float(self.sigma[0] / self.sigma[-1])
