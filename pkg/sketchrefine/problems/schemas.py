"""Least-squares problem model."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from sketchrefine.la_core.schemas import DenseMatrix, Vector


class LSProblem(BaseModel):
    """``min ‖b − A·y‖`` with optional planted minimizer and optimal residual.

    A generated instance has ``σ₁(A) = 1``, ``σ_n(A) = 1/kappa``,
    ``‖x_star‖ = 1``, ``‖r_star‖ = beta`` and ``b = A·x_star + r_star``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: DenseMatrix
    b: Vector
    x_star: Optional[Vector] = None
    r_star: Optional[Vector] = None
    kappa: float = Field(default=1.0, ge=1.0)
    beta: float = Field(default=0.0, ge=0.0)
    seed: int = 0

    @property
    def m(self) -> int:
        return int(self.a.shape[0])

    @property
    def n(self) -> int:
        return int(self.a.shape[1])

    @property
    def is_planted(self) -> bool:
        return self.x_star is not None
