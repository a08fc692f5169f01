"""Meta-solver configuration."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from sketchrefine.common.constants import DEFAULT_KRYLOV_K, MetaKind


class MetaConfig(BaseModel):
    """Which meta-solver to run; ``k`` is the Krylov step count.

    Both kinds have the linear-form reading ``meta(Aᵀb) = T·Aᵀb + q`` with
    ``q = 0``; the offset has no runtime representation.
    """

    model_config = ConfigDict(frozen=True)

    kind: MetaKind = MetaKind.krylov
    k: int = Field(default=DEFAULT_KRYLOV_K, ge=1)
