"""Sketch operator model."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np
import scipy.sparse
from pydantic import BaseModel, ConfigDict

from sketchrefine.common.constants import SketchKind


class SketchOperator(BaseModel):
    """Random embedding ``S ∈ R^{s×m}``.

    ``payload`` is a CSC matrix with exactly ``zeta`` entries ±1/√zeta per
    column for the sparse-sign kind, or a dense s×m array for Gaussian.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: SketchKind
    s: int
    m: int
    zeta: Optional[int] = None
    seed: int
    payload: Union[scipy.sparse.csc_matrix, np.ndarray]

    @property
    def is_sparse(self) -> bool:
        return self.kind == SketchKind.sparse_sign

    def densify(self) -> np.ndarray:
        """Explicit s×m matrix (testing and small-scale diagnostics)."""
        if self.is_sparse:
            return np.asfortranarray(self.payload.toarray())
        return np.asfortranarray(self.payload)
