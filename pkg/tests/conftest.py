"""Shared test fixtures — problem factories, sketches and preconditioners.

Small problems (m ≤ 200) keep the default suite fast; acceptance-scale
fixtures live behind the ``slow`` marker.
"""

from __future__ import annotations

import os

# Keep settings deterministic regardless of the developer's environment
os.environ.setdefault("SKETCHREFINE_LOG_LEVEL", "warning")

from typing import Optional

import numpy as np
import pytest

from sketchrefine.common.constants import SketchKind
from sketchrefine.la_core.service import matvec_t
from sketchrefine.meta_solvers.service import sketch_solve_contraction
from sketchrefine.precond.schemas import Preconditioner
from sketchrefine.precond.service import build
from sketchrefine.problems.schemas import LSProblem
from sketchrefine.problems.service import gen_synthetic
from sketchrefine.sketch.schemas import SketchOperator
from sketchrefine.sketch.service import default_zeta, make_sketch

# ── Factories ───────────────────────────────────────────────────────


def _make_problem(
    *,
    m: int = 120,
    n: int = 8,
    kappa: float = 1e2,
    beta: float = 1e-3,
    seed: int = 7,
) -> LSProblem:
    return gen_synthetic(m, n, kappa, beta, seed)


def _make_sketch(
    *,
    s: int,
    m: int,
    n: int = 8,
    seed: int = 11,
    kind: SketchKind = SketchKind.sparse_sign,
    zeta: Optional[int] = None,
) -> SketchOperator:
    return make_sketch(kind, s, m, seed, n=n, zeta=zeta or default_zeta(n, s))


def _make_preconditioned(
    problem: LSProblem,
    *,
    s: Optional[int] = None,
    seed: int = 11,
    kind: SketchKind = SketchKind.sparse_sign,
) -> tuple[SketchOperator, Preconditioner]:
    S = _make_sketch(s=s or 4 * problem.n, m=problem.m, n=problem.n, seed=seed, kind=kind)
    return S, build(problem.a, S)


def _make_contractive(
    problem: LSProblem,
    *,
    bound: float = 0.5,
    s: Optional[int] = None,
    tries: int = 200,
) -> tuple[SketchOperator, Preconditioner, float]:
    """First sketch seed whose sketch-solve iteration contracts below *bound*."""
    s = s or 40 * problem.m
    for seed in range(tries):
        S = _make_sketch(s=s, m=problem.m, n=problem.n, seed=seed, zeta=8)
        p = build(problem.a, S)
        rho = sketch_solve_contraction(problem.a, p)
        if rho < bound:
            return S, p, rho
    raise AssertionError(f"no contractive sketch in {tries} seeds")


def _normal_rhs(problem: LSProblem) -> np.ndarray:
    return matvec_t(problem.a, problem.b)


# ── Fixtures ────────────────────────────────────────────────────────


@pytest.fixture
def small_problem() -> LSProblem:
    """Well-conditioned 120×8 problem with a planted solution."""
    return _make_problem()


@pytest.fixture
def small_setup(small_problem) -> tuple[LSProblem, SketchOperator, Preconditioner]:
    S, p = _make_preconditioned(small_problem)
    return small_problem, S, p


@pytest.fixture
def rational_problem() -> LSProblem:
    """Exact instance: A = [e1 e2], x* = (1, 2), r* = 3·e3."""
    a = np.asfortranarray([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    x_star = np.array([1.0, 2.0])
    r_star = np.array([0.0, 0.0, 3.0])
    return LSProblem(a=a, b=a @ x_star + r_star, x_star=x_star, r_star=r_star, kappa=1.0, beta=3.0)
