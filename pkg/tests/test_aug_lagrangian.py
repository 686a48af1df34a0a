"""Tests for the augmented Lagrangian, the proximal subproblem and the Lyapunov value."""

import dataclasses

import numpy as np
import pytest

from proxal.aug_lagrangian import (
    ProxSubproblem,
    al_gradient,
    al_value,
    feasibility_function,
    lyapunov,
    prox_function,
    prox_gradient,
    prox_hvp,
    prox_value,
)
from proxal.errors import PreconditionError


def _fd_gradient(value, x, h=1e-6):
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (value(x + step) - value(x - step)) / (2 * h)
    return grad


def _relative_error(approx, exact):
    return float(np.max(np.abs(approx - exact) / (1.0 + np.abs(exact))))


def _random_subproblem(problem, rng):
    return ProxSubproblem(
        problem,
        rng.uniform(-1.0, 1.0, problem.m),
        rng.uniform(1.0, 10.0),
        rng.uniform(0.0, 1.0),
        rng.uniform(-1.0, 1.0, problem.n),
    )


class TestAugmentedLagrangian:
    def test_reduces_to_objective(self, sphere):
        x = np.array([0.3, 2.0])
        assert al_value(sphere, x, np.zeros(1), 0.0) == sphere.objective(x)
        np.testing.assert_array_equal(al_gradient(sphere, x, np.zeros(1), 0.0), sphere.gradient(x))

    def test_value_by_hand(self, sphere):
        assert al_value(sphere, np.array([1.0, 1.0]), np.array([2.0]), 4.0) == 5.0

    def test_feasible_point_gives_objective(self, qp):
        x = np.array([0.25, 0.75])
        for lam, rho in [(-3.0, 1.0), (0.5, 100.0), (7.0, 1e-3)]:
            assert al_value(qp, x, np.array([lam]), rho) == qp.objective(x)

    def test_gradient_vanishes_at_kkt_pair(self, sphere):
        np.testing.assert_array_equal(
            al_gradient(sphere, np.array([-1.0, 0.0]), np.array([0.5]), 37.0), [0.0, 0.0]
        )

    def test_gradient_by_hand(self, sphere):
        np.testing.assert_allclose(
            al_gradient(sphere, np.array([1.0, 1.0]), np.array([2.0]), 4.0), [13.0, 12.0]
        )


class TestProximalSubproblem:
    def test_anchor_without_proximal_term(self, sphere):
        x = np.array([0.4, -0.7])
        sub = ProxSubproblem(sphere, [0.3], 2.0, 0.0, x)
        assert prox_value(sub, x) == al_value(sphere, x, sub.lam, 2.0)
        np.testing.assert_array_equal(prox_gradient(sub, x), al_gradient(sphere, x, sub.lam, 2.0))

    def test_qp_hessian_is_constant(self, qp, rng):
        A = np.array([[1.0, 1.0]])
        sub = ProxSubproblem(qp, [0.8], 3.0, 0.25, np.zeros(2))
        d = rng.standard_normal(2)
        expected = d + 3.0 * A.T @ (A @ d) + 0.25 * d
        for _ in range(3):
            np.testing.assert_allclose(prox_hvp(sub, rng.standard_normal(2), d), expected)

    def test_hvp_by_hand(self, sphere):
        sub = ProxSubproblem(sphere, [0.0], 1.0, 0.5, np.zeros(2))
        x = np.array([1.0, 0.0])
        np.testing.assert_allclose(prox_hvp(sub, x, np.array([0.0, 1.0])), [0.0, 0.5])
        np.testing.assert_allclose(prox_hvp(sub, x, np.array([1.0, 0.0])), [4.5, 0.0])

    def test_derivatives_match_finite_differences(self, builtin_problems, rng):
        for problem in builtin_problems:
            for _ in range(10):
                sub = _random_subproblem(problem, rng)
                x = rng.uniform(-1.5, 1.5, problem.n)
                grad = prox_gradient(sub, x)
                assert _relative_error(_fd_gradient(lambda z: prox_value(sub, z), x), grad) <= 1e-5
                d = rng.standard_normal(problem.n)
                d /= np.linalg.norm(d)
                h = 1e-6
                fd_hvp = (prox_gradient(sub, x + h * d) - prox_gradient(sub, x - h * d)) / (2 * h)
                assert _relative_error(fd_hvp, prox_hvp(sub, x, d)) <= 1e-5

    def test_hvp_is_symmetric(self, builtin_problems, rng):
        for problem in builtin_problems:
            sub = _random_subproblem(problem, rng)
            x = rng.standard_normal(problem.n)
            d1, d2 = rng.standard_normal((2, problem.n))
            left = prox_hvp(sub, x, d1) @ d2
            right = d1 @ prox_hvp(sub, x, d2)
            assert abs(left - right) <= 1e-10 * (1.0 + abs(right))

    @pytest.mark.parametrize(
        "rho, beta, lam, anchor",
        [(0.0, 1.0, [0.0], [0.0, 0.0]), (1.0, -0.1, [0.0], [0.0, 0.0]), (1.0, 0.1, [0.0, 1.0], [0.0, 0.0])],
    )
    def test_invalid_subproblem(self, sphere, rho, beta, lam, anchor):
        with pytest.raises(PreconditionError):
            ProxSubproblem(sphere, lam, rho, beta, anchor)

    def test_subproblem_arrays_are_read_only(self, sphere):
        sub = ProxSubproblem(sphere, [0.1], 1.0, 0.1, [0.0, 1.0])
        with pytest.raises(ValueError):
            sub.anchor[0] = 5.0


class TestCachedFunctions:
    def test_constraints_evaluated_once_per_point(self, sphere):
        calls = []

        def counting_constraints(x):
            calls.append(x.copy())
            return sphere.constraints(x)

        problem = dataclasses.replace(sphere, constraints=counting_constraints)
        F = prox_function(ProxSubproblem(problem, [0.2], 5.0, 0.1, np.zeros(2)))
        x = np.array([0.3, 0.9])
        F.value(x)
        F.gradient(x)
        for _ in range(5):
            F.hvp(x, np.array([1.0, 0.0]))
        assert len(calls) == 1
        F.value(x + 1.0)
        assert len(calls) == 2

    def test_cached_function_matches_direct_evaluation(self, rosenbrock, rng):
        sub = _random_subproblem(rosenbrock, rng)
        F = prox_function(sub)
        x = rng.standard_normal(4)
        d = rng.standard_normal(4)
        assert F.value(x) == prox_value(sub, x)
        np.testing.assert_array_equal(F.gradient(x), prox_gradient(sub, x))
        np.testing.assert_array_equal(F.hvp(x, d), prox_hvp(sub, x, d))

    def test_feasibility_function_derivatives(self, builtin_problems, rng):
        for problem in builtin_problems:
            F = feasibility_function(problem)
            x = rng.uniform(-1.5, 1.5, problem.n)
            c = problem.constraints(x)
            assert F.value(x) == pytest.approx(float(c @ c))
            assert _relative_error(_fd_gradient(F.value, x), F.gradient(x)) <= 1e-5
            d = rng.standard_normal(problem.n)
            d /= np.linalg.norm(d)
            h = 1e-6
            fd_hvp = (F.gradient(x + h * d) - F.gradient(x - h * d)) / (2 * h)
            assert _relative_error(fd_hvp, F.hvp(x, d)) <= 1e-5


class TestLyapunov:
    def test_value_by_hand(self, sphere):
        value = lyapunov(sphere, 4.0, 2.0, np.array([1.0, 1.0]), np.array([1.0, 0.0]), np.array([2.0]))
        assert value == pytest.approx(5.5)

    def test_no_memory_term_without_motion(self, sphere):
        x = np.array([0.2, 0.5])
        lam = np.array([1.5])
        assert lyapunov(sphere, 3.0, 0.7, x, x, lam) == al_value(sphere, x, lam, 3.0)

    def test_zero_beta(self, sphere):
        x = np.array([0.2, 0.5])
        lam = np.array([1.5])
        assert lyapunov(sphere, 3.0, 0.0, x, -x, lam) == al_value(sphere, x, lam, 3.0)
