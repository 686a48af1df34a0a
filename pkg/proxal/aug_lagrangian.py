"""
Augmented Lagrangian module for proxal.

Evaluates L_ρ(x, λ) = f(x) + λᵀc(x) + (ρ/2)‖c(x)‖², the proximal subproblem
ψ_k(x) = L_ρ(x, λ_k) + (β/2)‖x - x_k‖² with its gradient and Hessian-vector
product, and the Lyapunov value P_k = L_ρ(x_k, λ_k) + (β/4)‖x_k - x_{k-1}‖².
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .problems import ensure_finite


def _constraint_values(problem, x):
    return np.asarray(ensure_finite(problem.constraints(x), "constraint value"), dtype=float)


def al_value(problem, x, lam, rho, c=None):
    """L_ρ(x, λ); ρ = 0 gives the ordinary Lagrangian."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if c is None:
        c = _constraint_values(problem, x)
    f = float(ensure_finite(problem.objective(x), "objective value"))
    return f + float(lam @ c) + 0.5 * rho * float(c @ c)


def al_gradient(problem, x, lam, rho, c=None):
    """∇_x L_ρ(x, λ) = ∇f(x) + ∇c(x)(λ + ρc(x))."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if c is None:
        c = _constraint_values(problem, x)
    grad = np.asarray(ensure_finite(problem.gradient(x), "gradient"), dtype=float)
    if problem.m == 0:
        return grad.copy()
    return grad + np.asarray(problem.jac_t_vec(x, lam + rho * c), dtype=float)


def lagrangian_gradient(problem, x, lam):
    """∇_x L₀(x, λ) = ∇f(x) + ∇c(x)λ."""
    return al_gradient(problem, x, lam, 0.0)


@dataclass(frozen=True)
class ProxSubproblem:
    """ψ_k data: the multiplier λ_k, the penalty ρ, the proximal weight β and the anchor x_k."""

    problem: object
    lam: np.ndarray
    rho: float
    beta: float
    anchor: np.ndarray

    def __post_init__(self):
        if not self.rho > 0:
            raise PreconditionError(f"rho must be positive, got {self.rho}")
        if not self.beta >= 0:
            raise PreconditionError(f"beta must be nonnegative, got {self.beta}")
        lam = np.array(self.lam, dtype=float).reshape(-1)
        anchor = np.array(self.anchor, dtype=float).reshape(-1)
        if lam.shape != (self.problem.m,) or anchor.shape != (self.problem.n,):
            raise PreconditionError("subproblem multiplier or anchor has the wrong dimension")
        lam.setflags(write=False)
        anchor.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "beta", float(self.beta))


def prox_value(sub, x, c=None):
    """ψ_k(x) = L_ρ(x, λ_k) + (β/2)‖x − x_k‖²."""
    x = np.asarray(x, dtype=float)
    shift = x - sub.anchor
    return al_value(sub.problem, x, sub.lam, sub.rho, c=c) + 0.5 * sub.beta * float(shift @ shift)


def prox_gradient(sub, x, c=None):
    """∇ψ_k(x) = ∇ₓL_ρ(x, λ_k) + β(x − x_k)."""
    x = np.asarray(x, dtype=float)
    return al_gradient(sub.problem, x, sub.lam, sub.rho, c=c) + sub.beta * (x - sub.anchor)


def prox_hvp(sub, x, d, c=None):
    """∇²ψ_k(x)d = H_L(x, λ + ρc)d + ρ∇c(x)(∇c(x)ᵀd) + βd."""
    problem = sub.problem
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if c is None:
        c = _constraint_values(problem, x)
    out = np.asarray(problem.lagrangian_hvp(x, sub.lam + sub.rho * c, d), dtype=float)
    if problem.m:
        out = out + sub.rho * np.asarray(problem.jac_t_vec(x, problem.jac_vec(x, d)), dtype=float)
    return out + sub.beta * d


def lyapunov(problem, rho, beta, x_k, x_prev, lam_k):
    """P_k = L_ρ(x_k, λ_k) + (β/4)‖x_k - x_{k-1}‖²."""
    step = np.asarray(x_k, dtype=float) - np.asarray(x_prev, dtype=float)
    return al_value(problem, x_k, lam_k, rho) + 0.25 * beta * float(step @ step)


@dataclass(frozen=True)
class SmoothFunction:
    """Value, gradient and Hessian-vector-product evaluators of one objective F."""

    value: Callable
    gradient: Callable
    hvp: Callable
    n: int


class _PointCache:
    """Remembers c(x) for the most recent x only."""

    def __init__(self, problem):
        self.problem = problem
        self.key = None
        self.c = None
        self.evaluations = 0

    def __call__(self, x):
        key = x.tobytes()
        if key != self.key:
            self.c = _constraint_values(self.problem, x)
            self.key = key
            self.evaluations += 1
        return self.c


def prox_function(sub):
    """Wrap ψ_k as a SmoothFunction sharing one c(x) evaluation per point.

    The cache is owned by the returned object; build one per worker.
    """
    cache = _PointCache(sub.problem)

    def value(x):
        x = np.asarray(x, dtype=float)
        return prox_value(sub, x, c=cache(x))

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return prox_gradient(sub, x, c=cache(x))

    def hvp(x, d):
        x = np.asarray(x, dtype=float)
        return prox_hvp(sub, x, d, c=cache(x))

    return SmoothFunction(value=value, gradient=gradient, hvp=hvp, n=sub.problem.n)


def feasibility_function(problem):
    """F(x) = ‖c(x)‖² for Phase I, with gradient 2∇c(x)c(x)."""
    cache = _PointCache(problem)
    zeros = np.zeros(problem.m)

    def value(x):
        c = cache(np.asarray(x, dtype=float))
        return float(c @ c)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.asarray(problem.jac_t_vec(x, cache(x)), dtype=float)

    def hvp(x, d):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        c = cache(x)
        # Σ cᵢ∇²cᵢ d, with the objective curvature subtracted back out
        curvature = np.asarray(problem.lagrangian_hvp(x, c, d), dtype=float) - np.asarray(
            problem.lagrangian_hvp(x, zeros, d), dtype=float
        )
        gauss_newton = np.asarray(problem.jac_t_vec(x, problem.jac_vec(x, d)), dtype=float)
        return 2.0 * (gauss_newton + curvature)

    return SmoothFunction(value=value, gradient=gradient, hvp=hvp, n=problem.n)
