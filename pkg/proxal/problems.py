"""
Problem model module for proxal.

Defines the equality-constrained problem interface (min f(x) s.t. c(x) = 0),
the constants ledger, the built-in desk-scale test problems and the
derivative verification utilities.

The constraint Jacobian follows the n×m convention: ∇c(x) has one column per
constraint, so ∇c(x)v lives in R^n and ∇c(x)ᵀd lives in R^m.
"""

from dataclasses import dataclass, fields
from typing import Callable, Optional

import numpy as np

from .config import FD_MAX_STEP, FD_STEP, JACOBIAN_RANK_TOLERANCE
from .errors import (
    EvaluationError,
    MissingConstantError,
    PreconditionError,
    ProblemDefinitionError,
)


@dataclass(frozen=True)
class ProblemInstance:
    """Black-box evaluators for an equality-constrained problem.

    `jac_t_vec(x, v)` returns ∇c(x)v (R^m -> R^n), `jac_vec(x, d)` returns
    ∇c(x)ᵀd (R^n -> R^m) and `lagrangian_hvp(x, w, d)` returns
    (∇²f(x) + Σ wᵢ∇²cᵢ(x))d. Evaluators only read problem data, so one
    instance may be shared by concurrent solves.
    """

    n: int
    m: int
    objective: Callable
    gradient: Callable
    constraints: Callable
    jac_t_vec: Callable
    jac_vec: Callable
    lagrangian_hvp: Callable
    name: str = "custom"
    metadata: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ProblemDefinitionError(f"n must be positive, got {self.n}")
        if self.m < 0 or self.m > self.n:
            raise ProblemDefinitionError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")


@dataclass(frozen=True)
class ConstantsLedger:
    """Problem constants used by the penalty threshold; None means unknown."""

    M_f: Optional[float] = None
    L_f: Optional[float] = None
    M_c: Optional[float] = None
    L_c: Optional[float] = None
    sigma: Optional[float] = None
    rho0: Optional[float] = None
    C0: Optional[float] = None
    R: Optional[float] = None
    lambda_min: Optional[float] = None
    lambda_max: Optional[float] = None

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if value is None or item.name in ("lambda_min", "lambda_max"):
                continue
            if value < 0:
                raise ProblemDefinitionError(f"ledger field '{item.name}' must be nonnegative")
        if self.sigma is not None and self.sigma <= 0:
            raise ProblemDefinitionError("ledger field 'sigma' must be positive")
        if self.R is not None and self.R < 1:
            raise ProblemDefinitionError("ledger field 'R' must lie in [1, inf)")
        if (
            self.lambda_min is not None
            and self.lambda_max is not None
            and self.lambda_min > self.lambda_max
        ):
            raise ProblemDefinitionError("ledger needs lambda_min <= lambda_max")

    def require(self, *names):
        """Return the requested fields, raising MissingConstantError on the first unknown."""
        values = []
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise MissingConstantError(name)
            values.append(value)
        return values


def ensure_finite(value, what, coordinate=None):
    """Raise EvaluationError when `value` holds NaN or Inf."""
    array = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(array)):
        where = "" if coordinate is None else f" (coordinate {coordinate})"
        raise EvaluationError(f"non-finite {what}{where}", coordinate=coordinate)
    return value


def dense_jacobian(problem, x):
    """Assemble ∇c(x) (n×m) from m unit-vector Jacobian-transpose products."""
    x = np.asarray(x, dtype=float)
    jac = np.zeros((problem.n, problem.m))
    for j in range(problem.m):
        unit = np.zeros(problem.m)
        unit[j] = 1.0
        jac[:, j] = ensure_finite(problem.jac_t_vec(x, unit), "Jacobian column", coordinate=j)
    return jac


def _check_step(h):
    if not (0.0 < h <= FD_MAX_STEP):
        raise PreconditionError(f"finite-difference step must lie in (0, {FD_MAX_STEP}], got {h}")


def fd_check_gradient(problem, x, h=FD_STEP):
    """Max relative error of ∇f and ∇c against central differences.

    The relative error of an entry is |fd - exact| / (1 + |exact|).
    """
    _check_step(h)
    x = np.asarray(x, dtype=float)
    ensure_finite(x, "point")
    grad = ensure_finite(problem.gradient(x), "gradient")
    worst = 0.0
    for i in range(problem.n):
        step = np.zeros(problem.n)
        step[i] = h
        f_plus = ensure_finite(problem.objective(x + step), "objective", coordinate=i)
        f_minus = ensure_finite(problem.objective(x - step), "objective", coordinate=i)
        fd = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, abs(fd - grad[i]) / (1.0 + abs(grad[i])))
        if problem.m:
            unit = np.zeros(problem.n)
            unit[i] = 1.0
            exact = ensure_finite(problem.jac_vec(x, unit), "Jacobian row", coordinate=i)
            c_plus = ensure_finite(problem.constraints(x + step), "constraints", coordinate=i)
            c_minus = ensure_finite(problem.constraints(x - step), "constraints", coordinate=i)
            fd_c = (np.asarray(c_plus) - np.asarray(c_minus)) / (2.0 * h)
            worst = max(worst, float(np.max(np.abs(fd_c - exact) / (1.0 + np.abs(exact)))))
    return worst


def fd_check_hvp(problem, x, w, d, h=FD_STEP):
    """Max relative error of the weighted Lagrangian HVP against central
    differences of x ↦ ∇f(x) + ∇c(x)w along the unit direction d."""
    _check_step(h)
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-8:
        raise PreconditionError("fd_check_hvp needs a unit direction d")

    def gradient_map(point):
        return np.asarray(problem.gradient(point)) + np.asarray(problem.jac_t_vec(point, w))

    exact = ensure_finite(problem.lagrangian_hvp(x, w, d), "Hessian-vector product")
    plus = ensure_finite(gradient_map(x + h * d), "gradient map")
    minus = ensure_finite(gradient_map(x - h * d), "gradient map")
    fd = (plus - minus) / (2.0 * h)
    return float(np.max(np.abs(fd - exact) / (1.0 + np.abs(exact))))


def adjointness_gap(problem, x, v, d):
    """|⟨∇c(x)v, d⟩ - ⟨v, ∇c(x)ᵀd⟩| / (1 + |⟨v, ∇c(x)ᵀd⟩|)."""
    left = float(np.dot(problem.jac_t_vec(x, v), d))
    right = float(np.dot(v, problem.jac_vec(x, d)))
    return abs(left - right) / (1.0 + abs(right))


def hvp_asymmetry(problem, x, w, d1, d2):
    """Relative asymmetry of the weighted Lagrangian HVP as a bilinear form."""
    left = float(np.dot(problem.lagrangian_hvp(x, w, d1), d2))
    right = float(np.dot(d1, problem.lagrangian_hvp(x, w, d2)))
    return abs(left - right) / (1.0 + abs(right))


def make_sphere_linear(n, b):
    """f(x) = bᵀx subject to ‖x‖² = 1; minimizer -b/‖b‖ with multiplier ‖b‖/2."""
    b = np.array(b, dtype=float)
    if n < 2:
        raise ProblemDefinitionError("sphere_linear needs n >= 2")
    if b.shape != (n,) or np.linalg.norm(b) == 0.0:
        raise ProblemDefinitionError("sphere_linear needs b in R^n with ‖b‖ > 0")
    b.setflags(write=False)

    def objective(x):
        return float(b @ x)

    def gradient(x):
        return b.copy()

    def constraints(x):
        return np.array([x @ x - 1.0])

    def jac_t_vec(x, v):
        return 2.0 * v[0] * np.asarray(x, dtype=float)

    def jac_vec(x, d):
        return np.array([2.0 * (x @ d)])

    def lagrangian_hvp(x, w, d):
        return 2.0 * w[0] * np.asarray(d, dtype=float)

    return ProblemInstance(
        n=n,
        m=1,
        objective=objective,
        gradient=gradient,
        constraints=constraints,
        jac_t_vec=jac_t_vec,
        jac_vec=jac_vec,
        lagrangian_hvp=lagrangian_hvp,
        name="sphere_linear",
        metadata=f"n={n}",
    )


def make_linear_qp(Q, p, A, b):
    """f(x) = ½xᵀQx - pᵀx subject to Ax = b; A must have full row rank."""
    Q = np.array(Q, dtype=float)
    p = np.array(p, dtype=float)
    A = np.atleast_2d(np.array(A, dtype=float))
    b = np.atleast_1d(np.array(b, dtype=float))
    m, n = A.shape
    if Q.shape != (n, n) or p.shape != (n,) or b.shape != (m,):
        raise ProblemDefinitionError("linear_qp dimensions do not match")
    if not np.allclose(Q, Q.T):
        raise ProblemDefinitionError("linear_qp needs a symmetric Q")
    singular_values = np.linalg.svd(A, compute_uv=False)
    if m > n or singular_values.min() <= JACOBIAN_RANK_TOLERANCE:
        raise ProblemDefinitionError(
            f"linear_qp needs A with full row rank (smallest singular value {singular_values.min():.3e})"
        )
    for array in (Q, p, A, b):
        array.setflags(write=False)

    def objective(x):
        return float(0.5 * x @ Q @ x - p @ x)

    def gradient(x):
        return Q @ x - p

    def constraints(x):
        return A @ x - b

    def jac_t_vec(x, v):
        return A.T @ v

    def jac_vec(x, d):
        return A @ d

    def lagrangian_hvp(x, w, d):
        return Q @ d

    return ProblemInstance(
        n=n,
        m=m,
        objective=objective,
        gradient=gradient,
        constraints=constraints,
        jac_t_vec=jac_t_vec,
        jac_vec=jac_vec,
        lagrangian_hvp=lagrangian_hvp,
        name="linear_qp",
        metadata=f"n={n}, m={m}",
    )


def make_rosenbrock_sphere(n):
    """Chained Rosenbrock on the sphere ‖x‖² = n (the all-ones point is feasible)."""
    if n < 2 or n % 2:
        raise ProblemDefinitionError("rosenbrock_sphere needs an even n >= 2")
    radius_sq = float(n)

    def objective(x):
        odd, even = x[0::2], x[1::2]
        return float(np.sum(100.0 * (even - odd**2) ** 2 + (1.0 - odd) ** 2))

    def gradient(x):
        odd, even = x[0::2], x[1::2]
        grad = np.empty(n)
        grad[0::2] = -400.0 * odd * (even - odd**2) - 2.0 * (1.0 - odd)
        grad[1::2] = 200.0 * (even - odd**2)
        return grad

    def constraints(x):
        return np.array([x @ x - radius_sq])

    def jac_t_vec(x, v):
        return 2.0 * v[0] * np.asarray(x, dtype=float)

    def jac_vec(x, d):
        return np.array([2.0 * (x @ d)])

    def lagrangian_hvp(x, w, d):
        odd, even = x[0::2], x[1::2]
        d_odd, d_even = d[0::2], d[1::2]
        h_oo = 1200.0 * odd**2 - 400.0 * even + 2.0
        h_oe = -400.0 * odd
        out = np.empty(n)
        out[0::2] = h_oo * d_odd + h_oe * d_even
        out[1::2] = h_oe * d_odd + 200.0 * d_even
        return out + 2.0 * w[0] * np.asarray(d, dtype=float)

    return ProblemInstance(
        n=n,
        m=1,
        objective=objective,
        gradient=gradient,
        constraints=constraints,
        jac_t_vec=jac_t_vec,
        jac_vec=jac_vec,
        lagrangian_hvp=lagrangian_hvp,
        name="rosenbrock_sphere",
        metadata=f"n={n}, r^2={n}",
    )


def _sphere_linear_from_params(params):
    b = params.get("b", [1.0, 0.0])
    return make_sphere_linear(int(params.get("n", len(b))), b)


def _linear_qp_from_params(params):
    missing = [key for key in ("Q", "p", "A", "b") if key not in params]
    if missing:
        raise ProblemDefinitionError(f"linear_qp is missing parameters {missing}")
    return make_linear_qp(params["Q"], params["p"], params["A"], params["b"])


def _rosenbrock_sphere_from_params(params):
    return make_rosenbrock_sphere(int(params.get("n", 2)))


PROBLEM_BUILDERS = {
    "sphere_linear": _sphere_linear_from_params,
    "linear_qp": _linear_qp_from_params,
    "rosenbrock_sphere": _rosenbrock_sphere_from_params,
}


def register_problem(name, builder):
    """Register a custom problem builder `builder(params) -> ProblemInstance`."""
    PROBLEM_BUILDERS[name] = builder


def build_problem(name, params=None):
    """Build a registered problem from its name and parameter dictionary."""
    if name not in PROBLEM_BUILDERS:
        known = ", ".join(sorted(PROBLEM_BUILDERS))
        raise ProblemDefinitionError(f"unknown problem '{name}' (known: {known})")
    return PROBLEM_BUILDERS[name](dict(params or {}))


def default_start(problem):
    """A deterministic start point for CLI runs without an explicit x0."""
    if problem.name == "sphere_linear":
        start = np.zeros(problem.n)
        start[1] = 1.0
        return start
    if problem.name == "rosenbrock_sphere":
        return np.full(problem.n, 0.9)
    return np.zeros(problem.n)
