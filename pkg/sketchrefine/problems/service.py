"""Planted least-squares problems and problem directories."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Union

import numpy as np

from sketchrefine.common.constants import (
    DIFFICULTY_MAX_EXP,
    DIFFICULTY_MIN_EXP,
    STREAM_PROBLEM,
    UNIT_ROUNDOFF,
)
from sketchrefine.common.exceptions import InputFileNotFoundError, InvalidParameterError
from sketchrefine.common.rng import derive_seed, make_rng
from sketchrefine.la_core.service import explicit_q, householder_qr, norm2
from sketchrefine.problems.matrix_market import load_matrix_market, load_vector, save_matrix_market
from sketchrefine.problems.schemas import LSProblem

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ── Generation ──────────────────────────────────────────────────────

def haar_columns(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """First *cols* columns of a Haar-distributed orthogonal ``rows×rows`` matrix."""
    gaussian = rng.standard_normal((rows, cols))
    # householder_qr fixes diag(R) ≥ 0, which makes Q exactly Haar
    return explicit_q(householder_qr(gaussian))


def singular_value_grid(n: int, kappa: float) -> np.ndarray:
    """``σ_i = κ^{−(i−1)/(n−1)}``, endpoints 1 and 1/κ inclusive."""
    if n == 1:
        return np.ones(1)
    return kappa ** (-np.arange(n) / (n - 1))


def _validate_generation(m: int, n: int, kappa: float, beta: float) -> None:
    errors: dict[str, list[str]] = {}
    if n < 1:
        errors["n"] = [f"n must be >= 1, got {n}"]
    if m <= n:
        errors["m"] = [f"need m > n, got m={m}, n={n}"]
    if not kappa >= 1.0:
        errors["kappa"] = [f"kappa must be >= 1, got {kappa}"]
    elif n == 1 and kappa != 1.0:
        errors["kappa"] = [f"n=1 admits only kappa=1, got {kappa}"]
    if not beta >= 0.0:
        errors["beta"] = [f"beta must be >= 0, got {beta}"]
    if errors:
        raise InvalidParameterError(errors)


def gen_synthetic(m: int, n: int, kappa: float, beta: float, seed: int) -> LSProblem:
    """``A = U₁ΣVᵀ``, unit ``x*``, residual of norm *beta* orthogonal to range(A)."""
    _validate_generation(m, n, kappa, beta)
    rng = make_rng(seed)

    u1 = haar_columns(rng, m, n)
    v = haar_columns(rng, n, n)
    sigma = singular_value_grid(n, kappa)
    a = np.asfortranarray((u1 * sigma) @ v.T)

    w = rng.standard_normal(n)
    x_star = w / norm2(w)

    # (I − U₁U₁ᵀ)g, projected twice so Aᵀr* vanishes to working precision
    g = rng.standard_normal(m)
    for _ in range(2):
        g = g - u1 @ (u1.T @ g)
    r_star = beta * (g / norm2(g))

    b = a @ x_star + r_star
    logger.debug("generated problem m=%d n=%d kappa=%.1e beta=%.1e seed=%d", m, n, kappa, beta, seed)
    return LSProblem(a=a, b=b, x_star=x_star, r_star=r_star, kappa=kappa, beta=beta, seed=seed)


def difficulty_levels(levels: int) -> np.ndarray:
    """``levels`` log-equispaced difficulties in ``[1e0, 1e16]``."""
    if levels < 2:
        raise InvalidParameterError({"levels": [f"levels must be >= 2, got {levels}"]})
    return np.logspace(DIFFICULTY_MIN_EXP, DIFFICULTY_MAX_EXP, levels)


def gen_difficulty_sweep(m: int, n: int, levels: int, master_seed: int = 0) -> list[LSProblem]:
    """One problem per difficulty ``d``: ``κ = d`` and ``β = u·d``."""
    problems = []
    for j, d in enumerate(difficulty_levels(levels)):
        seed = derive_seed(master_seed, STREAM_PROBLEM, j)
        problems.append(gen_synthetic(m, n, float(d), UNIT_ROUNDOFF * float(d), seed))
    return problems


# ── Problem directories ─────────────────────────────────────────────

def save_problem(problem: LSProblem, directory: PathLike) -> Path:
    """Write ``A.mtx``, ``b.mtx``, planted vectors when present, and ``meta.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix_market(problem.a, directory / "A.mtx")
    save_matrix_market(problem.b, directory / "b.mtx")
    if problem.x_star is not None:
        save_matrix_market(problem.x_star, directory / "x_star.mtx")
    if problem.r_star is not None:
        save_matrix_market(problem.r_star, directory / "r_star.mtx")

    meta = {
        "m": problem.m,
        "n": problem.n,
        "kappa": problem.kappa,
        "beta": problem.beta,
        "seed": problem.seed,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    logger.info("saved problem (%dx%d) to %s", problem.m, problem.n, directory)
    return directory


def load_problem(directory: PathLike) -> LSProblem:
    """Inverse of :func:`save_problem`; ``meta.json`` and planted vectors are optional."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputFileNotFoundError(str(directory))

    a = load_matrix_market(directory / "A.mtx")
    b = load_vector(directory / "b.mtx")
    fields: dict[str, Any] = {}
    for key in ("x_star", "r_star"):
        path = directory / f"{key}.mtx"
        if path.is_file():
            fields[key] = load_vector(path)

    meta_path = directory / "meta.json"
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        fields.update({k: meta[k] for k in ("kappa", "beta", "seed") if k in meta})
    return LSProblem(a=a, b=b, **fields)
