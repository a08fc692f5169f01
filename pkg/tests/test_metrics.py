"""Tests for error metrics, the Wedin floor and the QR baseline."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest
import scipy.linalg

from sketchrefine.common.constants import UNIT_ROUNDOFF
from sketchrefine.common.exceptions import InvalidParameterError, ShapeMismatchError, UndefinedMetricError
from sketchrefine.common.rng import make_rng
from sketchrefine.la_core.service import thin_svd
from sketchrefine.metrics.service import (
    evaluate,
    forward_error,
    forward_stability_bound,
    kw_backward_error,
    make_tracer,
    qr_direct_solve,
    residual_error,
    wedin_floor,
)
from tests.conftest import _make_problem


def _kw_reference(a: np.ndarray, b: np.ndarray, x_hat: np.ndarray, theta: float = 1.0) -> float:
    """Karlson–Waldén estimate through the inverse square root of ``AᵀA + μI``."""
    r_hat = b - a @ x_hat
    xn2 = float(x_hat @ x_hat)
    mu = theta**2 * float(r_hat @ r_hat) / (1 + theta**2 * xn2)
    w, v = scipy.linalg.eigh(a.T @ a + mu * np.eye(a.shape[1]))
    inv_sqrt = (v / np.sqrt(w)) @ v.T
    return theta / math.sqrt(1 + theta**2 * xn2) * float(np.linalg.norm(inv_sqrt @ (a.T @ r_hat)))


# ═════════════════════════════════════════════════════════════════════
# FORWARD + RESIDUAL
# ═════════════════════════════════════════════════════════════════════


class TestForwardAndResidual:
    """Tests for forward_error and residual_error."""

    def test_forward_error_value(self):
        assert forward_error([1.0, 1e-3], [1.0, 0.0]) == pytest.approx(1e-3)

    def test_forward_error_zero_solution_undefined(self):
        with pytest.raises(UndefinedMetricError):
            forward_error([1.0, 0.0], [0.0, 0.0])

    def test_forward_error_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            forward_error([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_residual_error_value(self, rational_problem):
        """‖A(x* − x̂)‖ = 0.3 against ‖r*‖ = 3."""
        p = rational_problem
        assert residual_error(p.a, p.b, [1.0, 2.3], p.x_star) == pytest.approx(0.1)

    def test_residual_error_consistent_system_undefined(self, rational_problem):
        p = rational_problem
        with pytest.raises(UndefinedMetricError):
            residual_error(p.a, p.a @ p.x_star, [1.0, 2.0], p.x_star)


# ═════════════════════════════════════════════════════════════════════
# KARLSON–WALDÉN
# ═════════════════════════════════════════════════════════════════════


class TestKWBackwardError:
    """Tests for kw_backward_error."""

    def test_exact_solution_of_rational_problem(self, rational_problem):
        p = rational_problem
        assert kw_backward_error(thin_svd(p.a), p.b, p.x_star) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("theta", [1.0, 0.5, 4.0])
    def test_matches_inverse_square_root_form(self, theta):
        problem = _make_problem(m=60, n=5, kappa=1e2, beta=1e-1, seed=2)
        x_hat = problem.x_star + 1e-4 * make_rng(9).standard_normal(problem.n)
        expected = _kw_reference(problem.a, problem.b, x_hat, theta)
        got = kw_backward_error(thin_svd(problem.a), problem.b, x_hat, theta)
        assert got == pytest.approx(expected, rel=1e-8)

    def test_least_squares_solution_is_backward_stable(self, small_problem):
        x_hat, *_ = np.linalg.lstsq(small_problem.a, small_problem.b, rcond=None)
        assert kw_backward_error(thin_svd(small_problem.a), small_problem.b, x_hat) < 100 * UNIT_ROUNDOFF

    def test_grows_with_perturbation(self, small_problem):
        svd = thin_svd(small_problem.a)
        direction = make_rng(3).standard_normal(small_problem.n)
        small = kw_backward_error(svd, small_problem.b, small_problem.x_star + 1e-8 * direction)
        large = kw_backward_error(svd, small_problem.b, small_problem.x_star + 1e-4 * direction)
        assert large > small

    def test_normal_equations_solution_is_zero(self):
        """A = [[1,0],[0,1],[1,1]], b = (1,2,4) has LS solution (4/3, 7/3) with Aᵀr = 0."""
        a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0, 4.0])
        assert kw_backward_error(thin_svd(a), b, [4.0 / 3.0, 7.0 / 3.0]) <= 10 * UNIT_ROUNDOFF

    def test_zero_row_padding_invariant(self):
        problem = _make_problem(m=60, n=5, kappa=1e3, beta=1e-2, seed=4)
        x_hat = problem.x_star + 1e-6 * make_rng(5).standard_normal(problem.n)
        padded_a = np.vstack([problem.a, np.zeros((25, problem.n))])
        padded_b = np.concatenate([problem.b, np.zeros(25)])
        plain = kw_backward_error(thin_svd(problem.a), problem.b, x_hat)
        padded = kw_backward_error(thin_svd(padded_a), padded_b, x_hat)
        assert padded == pytest.approx(plain, rel=1e-12, abs=10 * UNIT_ROUNDOFF)

    @pytest.mark.parametrize("seed", range(5))
    def test_doubling_residual_never_decreases(self, seed):
        problem = _make_problem(m=50, n=6, kappa=1e4, beta=1e-3, seed=seed)
        svd = thin_svd(problem.a)
        x_hat = problem.x_star + 1e-5 * make_rng(seed + 100).standard_normal(problem.n)
        r_hat = problem.b - problem.a @ x_hat
        single = kw_backward_error(svd, problem.a @ x_hat + r_hat, x_hat)
        double = kw_backward_error(svd, problem.a @ x_hat + 2.0 * r_hat, x_hat)
        assert double >= single - 10 * UNIT_ROUNDOFF

    def test_bounded_by_residual_over_solution(self, small_problem):
        """Never above θ‖r̂‖/√(1 + θ²‖x̂‖²)."""
        x_hat = small_problem.x_star + 1e-3 * make_rng(6).standard_normal(small_problem.n)
        r_hat = small_problem.b - small_problem.a @ x_hat
        bound = np.linalg.norm(r_hat) / math.sqrt(1 + float(x_hat @ x_hat))
        assert kw_backward_error(thin_svd(small_problem.a), small_problem.b, x_hat) <= bound * (1 + 1e-12)

    def test_qr_baseline_within_backward_stable_level(self):
        """Householder QR on (2000, 50, κ=1e8, β=1e-3) stays under √2·100·n·u."""
        problem = _make_problem(m=2000, n=50, kappa=1e8, beta=1e-3, seed=0)
        x_hat = qr_direct_solve(problem.a, problem.b)
        estimate = kw_backward_error(thin_svd(problem.a), problem.b, x_hat)
        assert estimate <= math.sqrt(2) * 100 * 50 * UNIT_ROUNDOFF

    def test_theta_must_be_positive(self, rational_problem):
        p = rational_problem
        with pytest.raises(InvalidParameterError):
            kw_backward_error(thin_svd(p.a), p.b, p.x_star, theta=0.0)


# ═════════════════════════════════════════════════════════════════════
# REFERENCE LEVELS
# ═════════════════════════════════════════════════════════════════════


class TestWedinFloor:
    """Tests for wedin_floor and forward_stability_bound."""

    def test_reference_values(self):
        """‖A‖ = 1, κ = 1e4, ‖x*‖ = 1, ‖r*‖ = 1e-3."""
        floor = wedin_floor(1.0, 1e4, 1.0, 1e-3)
        assert floor.forward_floor == pytest.approx(1.1e5 * UNIT_ROUNDOFF)
        assert floor.residual_floor == pytest.approx(11 * UNIT_ROUNDOFF)

    def test_kappa_below_one_rejected(self):
        with pytest.raises(InvalidParameterError):
            wedin_floor(1.0, 0.5, 1.0, 0.0)

    def test_stability_bound_scales_with_n(self):
        floor = wedin_floor(1.0, 1e4, 1.0, 1e-3).forward_floor
        assert forward_stability_bound(4, 1e4, 1.0, 1.0, 1e-3) == pytest.approx(100 * 8 * floor)
        assert forward_stability_bound(4, 1e4, 1.0, 1.0, 1e-3, constant=1.0) == pytest.approx(8 * floor)


# ═════════════════════════════════════════════════════════════════════
# BASELINE + EVALUATION
# ═════════════════════════════════════════════════════════════════════


class TestQRDirect:
    """Tests for the Householder QR baseline."""

    def test_matches_lstsq(self, small_problem):
        expected, *_ = np.linalg.lstsq(small_problem.a, small_problem.b, rcond=None)
        np.testing.assert_allclose(qr_direct_solve(small_problem.a, small_problem.b), expected, rtol=1e-10)

    def test_rank_deficiency_only_warns(self, caplog):
        problem = _make_problem(m=40, n=3)
        a = problem.a.copy()
        a[:, 2] = 1e-20 * make_rng(1).standard_normal(40)
        with caplog.at_level(logging.WARNING, logger="sketchrefine.metrics.service"):
            x = qr_direct_solve(a, problem.b)
        assert x.shape == (3,)
        assert "rank deficient" in caplog.text


class TestEvaluate:
    """Tests for evaluate and make_tracer."""

    def test_exact_solution(self, rational_problem):
        p = rational_problem
        errors = evaluate(p.a, p.b, thin_svd(p.a), p.x_star, p.x_star)
        assert errors.forward == 0.0
        assert errors.residual == 0.0
        assert errors.backward_kw == pytest.approx(0.0, abs=1e-15)

    def test_consistent_system_residual_is_nan(self, rational_problem):
        p = rational_problem
        b = p.a @ p.x_star
        errors = evaluate(p.a, b, thin_svd(p.a), [1.0, 2.5], p.x_star)
        assert math.isnan(errors.residual)
        assert errors.forward > 0.0

    def test_tracer_without_planted_solution(self, small_problem):
        tracer = make_tracer(small_problem.a, small_problem.b, thin_svd(small_problem.a), None)
        errors = tracer(small_problem.x_star)
        assert math.isnan(errors.forward)
        assert math.isnan(errors.residual)
        assert math.isfinite(errors.backward_kw)

    def test_tracer_with_planted_solution(self, small_problem):
        tracer = make_tracer(small_problem.a, small_problem.b, thin_svd(small_problem.a), small_problem.x_star)
        errors = tracer(small_problem.x_star)
        assert errors.forward == 0.0
        assert errors.residual == 0.0
