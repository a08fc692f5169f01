"""Metric result models."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class ErrorTriple(BaseModel):
    """Forward, residual and Karlson–Waldén backward error of one iterate.

    ``residual`` is NaN when the optimal residual is zero (undefined metric).
    """

    model_config = ConfigDict(frozen=True)

    forward: float
    residual: float
    backward_kw: float


class WedinFloor(BaseModel):
    """Best achievable errors of a backward-stable solver (no n^{3/2} factor)."""

    model_config = ConfigDict(frozen=True)

    forward_floor: float
    residual_floor: float
