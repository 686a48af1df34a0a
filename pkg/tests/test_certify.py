"""Tests for the first- and second-order certificates."""

import math

import numpy as np
import pytest

from proxal.aug_lagrangian import ProxSubproblem
from proxal.certify import (
    ESTIMATE,
    check_1o,
    check_2o,
    check_subproblem_2o,
    estimate_multiplier,
    tangent_basis,
)
from proxal.config import DENSE_THRESHOLD
from proxal.errors import PreconditionError, RankDeficiencyError, UnsupportedSizeError
from proxal.problems import make_linear_qp, make_sphere_linear


def _random_qp(rng):
    n = int(rng.integers(2, 51))
    m = int(rng.integers(1, min(10, n - 1) + 1))
    Q = rng.standard_normal((n, n))
    return make_linear_qp(0.5 * (Q + Q.T), rng.standard_normal(n), rng.standard_normal((m, n)), rng.standard_normal(m))


def _brute_force_reduced_eig(problem, x, lam):
    """λ_min of the Lagrangian Hessian restricted to null(∇c(x)ᵀ), via a full SVD."""
    n = problem.n
    hessian = np.column_stack([problem.lagrangian_hvp(x, lam, e) for e in np.eye(n)])
    jac_t = np.vstack([problem.jac_vec(x, e) for e in np.eye(n)]).T
    _, sigma, vt = np.linalg.svd(jac_t)
    rank = int(np.sum(sigma > 1e-10 * sigma[0]))
    basis = vt[rank:].T
    return float(np.linalg.eigvalsh(basis.T @ (0.5 * (hessian + hessian.T)) @ basis)[0])


class TestEstimateMultiplier:
    @pytest.mark.parametrize("x, expected", [([-1.0, 0.0], 0.5), ([1.0, 0.0], -0.5)])
    def test_sphere_linear(self, sphere, x, expected):
        np.testing.assert_allclose(estimate_multiplier(sphere, np.array(x)), [expected])

    def test_zero_jacobian(self, sphere):
        with pytest.raises(RankDeficiencyError) as excinfo:
            estimate_multiplier(sphere, np.zeros(2))
        assert excinfo.value.sigma_min == 0.0

    def test_least_squares_is_never_worse(self, builtin_problems, rng):
        for problem in builtin_problems:
            x = rng.standard_normal(problem.n)
            best = check_1o(problem, x, ESTIMATE, 1.0)
            for _ in range(10):
                other = check_1o(problem, x, best.lambda_used + rng.standard_normal(problem.m), 1.0)
                assert best.stat_norm <= other.stat_norm + 1e-12


class TestCheck1o:
    def test_minimizer(self, sphere):
        cert = check_1o(sphere, np.array([-1.0, 0.0]), np.array([0.5]), 1e-12)
        assert cert.is_1o()
        assert (cert.stat_norm, cert.feas_norm) == (0.0, 0.0)
        assert cert.reduced_min_eig is None
        assert not cert.is_2o()

    def test_maximizer_is_first_order_stationary(self, sphere):
        assert check_1o(sphere, np.array([1.0, 0.0]), np.array([-0.5]), 1e-12).is_1o()

    def test_stationarity_violation(self, sphere):
        cert = check_1o(sphere, np.array([0.0, 1.0]), np.zeros(1), 0.5)
        assert cert.stat_norm == pytest.approx(1.0)
        assert not cert.is_1o()

    def test_estimated_multiplier(self, sphere):
        cert = check_1o(sphere, np.array([-1.0, 0.0]), ESTIMATE, 1e-10)
        np.testing.assert_allclose(cert.lambda_used, [0.5])
        assert cert.null_space_dim == 1

    def test_monotone_in_epsilon(self, sphere, rng):
        for _ in range(20):
            x = rng.standard_normal(2)
            cert = check_2o(sphere, x, rng.standard_normal(1), 1.0)
            for small, large in [(0.1, 0.5), (1.0, 3.0), (3.0, 100.0)]:
                assert not cert.is_1o(small) or cert.is_1o(large)
                assert not cert.is_2o(small) or cert.is_2o(large)

    @pytest.mark.parametrize("lam, epsilon", [("guess", 0.1), ([0.5], 0.0), ([0.5, 1.0], 0.1)])
    def test_invalid_inputs(self, sphere, lam, epsilon):
        with pytest.raises(PreconditionError):
            check_1o(sphere, np.array([-1.0, 0.0]), lam, epsilon)


class TestCheck2o:
    def test_minimizer(self, sphere):
        cert = check_2o(sphere, np.array([-1.0, 0.0]), np.array([0.5]), 1e-10)
        assert cert.reduced_min_eig == pytest.approx(1.0)
        assert cert.is_2o()

    def test_maximizer(self, sphere):
        cert = check_2o(sphere, np.array([1.0, 0.0]), np.array([-0.5]), 1e-10)
        assert cert.reduced_min_eig == pytest.approx(-1.0)
        assert not cert.is_2o(0.5)
        assert cert.is_2o(1.0)

    def test_trivial_tangent_space(self):
        problem = make_linear_qp(np.diag([-3.0, 1.0]), np.zeros(2), np.eye(2), np.zeros(2))
        cert = check_2o(problem, np.zeros(2), np.zeros(2), 1e-8)
        assert cert.null_space_dim == 0
        assert cert.reduced_min_eig == math.inf
        assert cert.is_2o() == cert.is_1o()
        assert cert.to_dict()["reduced_min_eig"] == "inf"

    def test_matches_brute_force_on_random_instances(self, rng):
        for index in range(100):
            if index % 4 == 0:
                n = int(rng.integers(2, 51))
                problem = make_sphere_linear(n, rng.standard_normal(n))
            else:
                problem = _random_qp(rng)
            x = rng.standard_normal(problem.n)
            lam = rng.standard_normal(problem.m)
            cert = check_2o(problem, x, lam, 1e-3)
            assert cert.null_space_dim == problem.n - problem.m
            assert abs(cert.reduced_min_eig - _brute_force_reduced_eig(problem, x, lam)) <= 1e-8

    def test_tangent_basis_is_orthonormal(self, rng):
        problem = _random_qp(rng)
        basis = tangent_basis(problem, np.zeros(problem.n))
        np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-12)
        for column in basis.T:
            assert np.linalg.norm(problem.jac_vec(np.zeros(problem.n), column)) <= 1e-10

    def test_size_limit(self):
        problem = make_sphere_linear(DENSE_THRESHOLD + 1, np.ones(DENSE_THRESHOLD + 1))
        with pytest.raises(UnsupportedSizeError):
            check_2o(problem, np.ones(problem.n), np.zeros(1), 0.1)


class TestSubproblemCheck:
    def test_convex_qp_subproblem(self, qp):
        sub = ProxSubproblem(qp, [0.3], 7.0, 0.2, np.zeros(2))
        ok, smallest = check_subproblem_2o(sub, np.array([4.0, -2.0]), 1e-12)
        assert ok
        assert smallest == pytest.approx(1.2)

    def test_near_the_saddle(self, sphere):
        sub = ProxSubproblem(sphere, [-0.5], 0.01, 0.01, np.zeros(2))
        ok, smallest = check_subproblem_2o(sub, np.array([1.0, 0.0]), 0.1)
        assert not ok
        assert smallest == pytest.approx(-0.99)

    def test_large_shift_always_passes(self, sphere, rng):
        for _ in range(10):
            x = rng.standard_normal(2)
            sub = ProxSubproblem(sphere, rng.standard_normal(1), 1.0, 100.0, np.zeros(2))
            assert check_subproblem_2o(sub, x, 1e-6)[0]
