"""Runtime configuration via environment variables (prefix ``SKETCHREFINE_``)."""

import os
from typing import List

from pydantic_settings import BaseSettings

from sketchrefine.common.exceptions import InvalidParameterError


class Settings(BaseSettings):
    """Defaults for every CLI flag; ``SKETCHREFINE_<FIELD>`` overrides them."""

    # Problem grid
    M: int = 2000
    N: int = 50
    S: int = 200
    KAPPA: str = "1e4,1e8,1e12"
    BETA: str = "1e-1,1e-3"
    SEEDS: int = 10
    REPEATS: int = 1

    # Sketch
    SKETCH: str = "sparse_sign"
    ZETA: int = 0  # 0 → ceil(2·log2(n))

    # Solver
    META: str = "krylov"
    KRYLOV_K: int = 2
    SRR_DEPTH: int = 4
    SRR_STANDALONE_DEPTH: int = 6
    MAX_OUTER: int = 50

    # Harness
    OUT: str = "results.csv"
    THREADS: int = 0  # 0 → logical cores
    MASTER_SEED: int = 20240601

    # App
    LOG_LEVEL: str = "info"

    @property
    def kappa_list(self) -> List[float]:
        """Parse the comma-separated KAPPA string."""
        return parse_float_list(self.KAPPA, "SKETCHREFINE_KAPPA")

    @property
    def beta_list(self) -> List[float]:
        """Parse the comma-separated BETA string."""
        return parse_float_list(self.BETA, "SKETCHREFINE_BETA")

    @property
    def worker_count(self) -> int:
        return self.THREADS if self.THREADS > 0 else (os.cpu_count() or 1)

    class Config:
        env_prefix = "SKETCHREFINE_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True


def parse_float_list(raw: str, name: str = "value") -> List[float]:
    """Comma- or semicolon-separated floats; blank tokens are skipped."""
    values: List[float] = []
    for tok in raw.replace(";", ",").split(","):
        if not tok.strip():
            continue
        try:
            values.append(float(tok))
        except ValueError:
            raise InvalidParameterError({name: [f"not a number: '{tok.strip()}'"]})
    return values


settings = Settings()
