"""Tests for the sketch-and-solve and Krylov meta-solvers."""

from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from sketchrefine.common.constants import UNIT_ROUNDOFF, MetaKind
from sketchrefine.common.rng import make_rng
from sketchrefine.la_core.service import matvec_t, norm2, normal_matvec
from sketchrefine.meta_solvers.schemas import MetaConfig
from sketchrefine.meta_solvers.service import (
    _galerkin_combine,
    krylov_meta,
    krylov_meta_normal,
    meta_normal,
    meta_residual,
    predicted_contraction,
    sketch_solve_contraction,
    sketch_solve_meta,
)
from sketchrefine.precond.service import apply_rinv_t, build, normal_solve, whitened_singular_values
from sketchrefine.sketch.service import identity_sketch
from tests.conftest import _make_contractive, _make_preconditioned, _make_problem, _normal_rhs

SKETCH = MetaConfig(kind=MetaKind.sketch_solve)
KRYLOV = MetaConfig(kind=MetaKind.krylov, k=2)


def _lstsq(problem, rhs):
    solution, *_ = np.linalg.lstsq(problem.a, rhs, rcond=None)
    return solution


class TestMetaConfig:
    def test_defaults(self):
        config = MetaConfig()
        assert config.kind == MetaKind.krylov
        assert config.k == 2

    def test_k_must_be_positive(self):
        with pytest.raises(ValidationError):
            MetaConfig(k=0)


class TestSketchSolveMeta:
    """Sketch-and-solve is ``(RᵀR)⁻¹·Aᵀr``."""

    def test_matches_normal_solve(self, small_setup):
        problem, _, p = small_setup
        z = _normal_rhs(problem)
        np.testing.assert_array_equal(sketch_solve_meta(problem.a, p, z), normal_solve(p, z))

    def test_residual_and_normal_forms_agree(self, small_setup):
        problem, _, p = small_setup
        from_residual = meta_residual(SKETCH, problem.a, p, problem.b)
        from_normal = meta_normal(SKETCH, problem.a, p, _normal_rhs(problem))
        np.testing.assert_allclose(from_residual, from_normal, rtol=1e-14)

    def test_linear_in_right_hand_side(self):
        problem = _make_problem(m=400, n=8, kappa=1.0, seed=3)
        _, p = _make_preconditioned(problem, s=64)
        rng = make_rng(12)
        u, v = rng.standard_normal(problem.n), rng.standard_normal(problem.n)
        combined = sketch_solve_meta(problem.a, p, 2.5 * u - 0.75 * v)
        separate = 2.5 * sketch_solve_meta(problem.a, p, u) - 0.75 * sketch_solve_meta(problem.a, p, v)
        assert norm2(combined - separate) <= 10 * problem.n * UNIT_ROUNDOFF * norm2(separate)

    @pytest.mark.parametrize("kappa", [1.0, 10.0, 100.0])
    def test_matches_explicit_sketched_normal_equations(self, kappa):
        """Agrees with ``((SA)ᵀSA)⁻¹·rA`` formed from the dense sketch."""
        problem = _make_problem(m=30, n=5, kappa=kappa, seed=6)
        S, p = _make_preconditioned(problem, s=20)
        sa = S.densify() @ problem.a
        z = _normal_rhs(problem)
        expected = np.linalg.solve(sa.T @ sa, z)
        np.testing.assert_allclose(sketch_solve_meta(problem.a, p, z), expected, rtol=1e-10)

    def test_contraction_below_one_for_large_sketch(self):
        problem = _make_problem(m=30, n=5, kappa=10.0)
        _, _, rho = _make_contractive(problem)
        assert 0.0 <= rho < 0.5

    def test_contraction_is_zero_for_exact_preconditioner(self):
        """S = I gives ``RᵀR = AᵀA`` and nothing left to contract."""
        problem = _make_problem(m=40, n=4, kappa=1e3)
        p = build(problem.a, identity_sketch(40))
        assert sketch_solve_contraction(problem.a, p) < 1e-10


class TestKrylovMeta:
    """Tests for the k-step Krylov enhancement."""

    def test_more_accurate_than_sketch_solve(self):
        """One Krylov call lands closer to the solution in the A-norm than one sketch-solve call."""
        problem = _make_problem(m=300, n=10, kappa=1e4, beta=1e-2, seed=3)
        _, p = _make_preconditioned(problem, s=40)
        truth = _lstsq(problem, problem.b)
        sketch_err = norm2(problem.a @ (meta_residual(SKETCH, problem.a, p, problem.b) - truth))
        krylov_err = norm2(problem.a @ (meta_residual(KRYLOV, problem.a, p, problem.b) - truth))
        assert krylov_err < sketch_err

    def test_residual_form_is_galerkin_optimal(self, small_setup):
        """The result beats every basis vector it was built from."""
        problem, _, p = small_setup
        y = krylov_meta(problem.a, p, problem.b, k=3)
        best = norm2(problem.b - problem.a @ y)
        y0 = normal_solve(p, matvec_t(problem.a, problem.b))
        assert best <= norm2(problem.b - problem.a @ y0) * (1 + 1e-12)

    def test_normal_form_minimizes_whitened_residual(self, small_setup):
        """``‖R⁻ᵀ(z − AᵀA·y)‖`` is no larger than for the first basis vector."""
        problem, _, p = small_setup
        z = _normal_rhs(problem)

        def whitened(y):
            return norm2(apply_rinv_t(p, z - normal_matvec(problem.a, y)))

        y = krylov_meta_normal(problem.a, p, z, k=2)
        assert whitened(y) <= whitened(normal_solve(p, z)) * (1 + 1e-12)

    def test_beats_every_basis_vector(self, small_setup):
        problem, _, p = small_setup
        r = problem.b
        basis = [normal_solve(p, matvec_t(problem.a, r))]
        for _ in range(3):
            basis.append(basis[-1] + normal_solve(p, matvec_t(problem.a, r - problem.a @ basis[-1])))
        best = min(norm2(problem.a @ y - r) for y in basis)
        out = krylov_meta(problem.a, p, r, k=3)
        assert norm2(problem.a @ out - r) <= best + 100 * UNIT_ROUNDOFF * norm2(r)

    def test_recovers_planted_solution(self):
        """r = A·w with k = n − 1 spans the whole solution space."""
        problem = _make_problem(m=30, n=5, kappa=10.0, seed=2)
        _, p = _make_preconditioned(problem)
        w = make_rng(8).standard_normal(problem.n)
        out = krylov_meta(problem.a, p, problem.a @ w, k=problem.n - 1)
        assert norm2(out - w) <= 1e-10 * norm2(w)

    @pytest.mark.parametrize("seed", range(10))
    def test_bad_embedding_no_worse_than_one_sketch_solve(self, seed):
        """s = ⌈1.2n⌉ may give η > 1; the combine still matches y₀ or better."""
        problem = _make_problem(m=200, n=10, kappa=1e2, beta=1e-2, seed=seed)
        _, p = _make_preconditioned(problem, s=math.ceil(1.2 * problem.n), seed=seed)
        projected = problem.a @ _lstsq(problem, problem.b)
        y0 = normal_solve(p, matvec_t(problem.a, problem.b))
        out = krylov_meta(problem.a, p, problem.b, k=2)
        slack = 100 * UNIT_ROUNDOFF * norm2(problem.b)
        assert norm2(problem.a @ out - projected) <= norm2(problem.a @ y0 - projected) + slack

    @pytest.mark.parametrize("scale", [4.0, 3.0, -0.1])
    def test_scales_with_residual(self, scale):
        problem = _make_problem(m=200, n=6, kappa=10.0, beta=1e-2, seed=5)
        _, p = _make_preconditioned(problem)
        base = krylov_meta(problem.a, p, problem.b, k=2)
        scaled = krylov_meta(problem.a, p, scale * problem.b, k=2)
        assert norm2(scaled - scale * base) <= 100 * UNIT_ROUNDOFF * norm2(scale * base)

    def test_dispatch_uses_k(self, small_setup):
        problem, _, p = small_setup
        np.testing.assert_array_equal(
            meta_residual(MetaConfig(k=3), problem.a, p, problem.b),
            krylov_meta(problem.a, p, problem.b, 3),
        )

    def test_zero_residual_gives_zero_correction(self, small_setup):
        problem, _, p = small_setup
        y = meta_residual(KRYLOV, problem.a, p, np.zeros(problem.m))
        assert np.all(y == 0.0)


class TestGalerkinCombine:
    """Tests for the column-dropping small least-squares solve."""

    def test_zero_image(self):
        basis = np.ones((3, 2))
        assert np.all(_galerkin_combine(np.zeros((5, 2)), np.ones(5), basis) == 0.0)

    def test_duplicate_columns_dropped(self):
        """A repeated column does not break the solve."""
        image = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        basis = np.eye(2)
        combined = _galerkin_combine(image, np.array([2.0, 0.0, 2.0]), basis)
        np.testing.assert_allclose(image @ combined, [2.0, 0.0, 2.0], atol=1e-14)

    def test_full_rank_exact(self):
        image = np.array([[2.0, 0.0], [0.0, 4.0], [0.0, 0.0]])
        combined = _galerkin_combine(image, np.array([2.0, 8.0, 1.0]), np.eye(2))
        np.testing.assert_allclose(combined, [1.0, 2.0], rtol=1e-15)


class TestPredictedContraction:
    """Rate law as a function of distortion."""

    def test_sketch_solve_rate(self):
        assert predicted_contraction(0.5, SKETCH) == pytest.approx(3.0)
        assert predicted_contraction(0.1, SKETCH) == pytest.approx(1 / 0.81 - 1)

    def test_sketch_solve_infinite_at_one(self):
        assert predicted_contraction(1.0, SKETCH) == math.inf

    def test_krylov_rate(self):
        assert predicted_contraction(0.5, KRYLOV) == pytest.approx(0.25)
        assert predicted_contraction(0.0, KRYLOV) == 0.0

    def test_contraction_matches_whitened_spectrum(self, small_setup):
        problem, _, p = small_setup
        sigma = whitened_singular_values(problem.a, p)
        expected = max(abs(1 - sigma[0] ** 2), abs(1 - sigma[-1] ** 2))
        assert sketch_solve_contraction(problem.a, p) == pytest.approx(expected, rel=1e-14)
