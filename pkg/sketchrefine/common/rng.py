"""Reproducible random streams: Philox generators keyed by derived 64-bit seeds."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seeds give identical streams on every platform."""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(master: int, stream: int, *indices: int) -> int:
    """Derive an independent 64-bit seed for ``(stream, *indices)`` under *master*."""
    entropy = [int(master), int(stream), *(int(i) for i in indices)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
