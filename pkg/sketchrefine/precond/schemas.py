"""Preconditioner model."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict

from sketchrefine.la_core.schemas import DenseMatrix, QRFactors


class Preconditioner(BaseModel):
    """Upper-triangular ``r`` from QR of ``S·A``; immutable after build."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    r: DenseMatrix
    source_seed: int
    distortion_hint: Optional[float] = None
    sketch_qr: Optional[QRFactors] = None  # kept for the sketch-and-solve start

    @property
    def n(self) -> int:
        return int(self.r.shape[0])
