"""Shared fixtures for the proxal test suite."""

import json

import numpy as np
import pytest

from proxal.aug_lagrangian import SmoothFunction
from proxal.problems import ProblemInstance, make_linear_qp, make_rosenbrock_sphere, make_sphere_linear


def unconstrained_quadratic(diagonal):
    """f(x) = ½xᵀdiag(d)x with no constraints (m = 0)."""
    diagonal = np.asarray(diagonal, dtype=float)
    n = diagonal.size
    return ProblemInstance(
        n=n,
        m=0,
        objective=lambda x: float(0.5 * np.sum(diagonal * x * x)),
        gradient=lambda x: diagonal * x,
        constraints=lambda x: np.zeros(0),
        jac_t_vec=lambda x, v: np.zeros(n),
        jac_vec=lambda x, d: np.zeros(0),
        lagrangian_hvp=lambda x, w, d: diagonal * d,
        name="quadratic",
    )


def shifted_parabola_problem():
    """c(x) = x₁² + 1 never vanishes; ‖c‖² is stationary at x₁ = 0 with ‖c‖ = 1."""
    return ProblemInstance(
        n=2,
        m=1,
        objective=lambda x: float(x @ x),
        gradient=lambda x: 2.0 * x,
        constraints=lambda x: np.array([x[0] ** 2 + 1.0]),
        jac_t_vec=lambda x, v: np.array([2.0 * x[0] * v[0], 0.0]),
        jac_vec=lambda x, d: np.array([2.0 * x[0] * d[0]]),
        lagrangian_hvp=lambda x, w, d: 2.0 * d + np.array([2.0 * w[0] * d[0], 0.0]),
        name="shifted_parabola",
    )


def matrix_function(H):
    """SmoothFunction for F(z) = ½zᵀHz."""
    H = np.asarray(H, dtype=float)
    return SmoothFunction(
        value=lambda z: float(0.5 * z @ H @ z),
        gradient=lambda z: H @ z,
        hvp=lambda z, d: H @ d,
        n=H.shape[0],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def sphere():
    return make_sphere_linear(2, [1.0, 0.0])


@pytest.fixture
def qp():
    return make_linear_qp(np.eye(2), np.zeros(2), [[1.0, 1.0]], [1.0])


@pytest.fixture
def rosenbrock():
    return make_rosenbrock_sphere(4)


@pytest.fixture
def builtin_problems(sphere, qp, rosenbrock):
    rng = np.random.default_rng(7)
    Q = rng.standard_normal((5, 5))
    wide_qp = make_linear_qp(Q + Q.T, rng.standard_normal(5), rng.standard_normal((2, 5)), rng.standard_normal(2))
    return [sphere, make_sphere_linear(5, [0.3, -1.0, 2.0, 0.5, 0.0]), qp, wide_qp, rosenbrock]


@pytest.fixture
def infeasible_problem():
    return shifted_parabola_problem()


@pytest.fixture
def write_json(tmp_path):
    def _write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    return _write
