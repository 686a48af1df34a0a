"""
Certification module for proxal.

Independent ε-first-order / ε-second-order checks at a candidate point,
built only from the problem's evaluators with dense desk-scale linear
algebra (SVD rank decisions, least squares, null-space bases).
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .aug_lagrangian import lagrangian_gradient, prox_hvp
from .config import DENSE_THRESHOLD, JACOBIAN_RANK_TOLERANCE, RANK_TOLERANCE
from .errors import PreconditionError, RankDeficiencyError, UnsupportedSizeError
from .problems import dense_jacobian, ensure_finite

log = logging.getLogger(__name__)

ESTIMATE = "estimate"


@dataclass
class Certificate:
    lambda_used: np.ndarray
    stat_norm: float
    feas_norm: float
    epsilon: float
    null_space_dim: int
    rank_tolerance: float = RANK_TOLERANCE
    reduced_min_eig: Optional[float] = None

    def is_1o(self, epsilon=None):
        epsilon = self.epsilon if epsilon is None else epsilon
        return self.stat_norm <= epsilon and self.feas_norm <= epsilon

    def is_2o(self, epsilon=None):
        epsilon = self.epsilon if epsilon is None else epsilon
        if self.reduced_min_eig is None:
            return False
        return self.is_1o(epsilon) and self.reduced_min_eig >= -epsilon

    def to_dict(self):
        eig = self.reduced_min_eig
        return {
            "lambda": [float(v) for v in self.lambda_used],
            "stat_norm": self.stat_norm,
            "feas_norm": self.feas_norm,
            "epsilon": self.epsilon,
            "null_space_dim": self.null_space_dim,
            "rank_tolerance": self.rank_tolerance,
            # JSON has no infinity
            "reduced_min_eig": None if eig is None else (eig if math.isfinite(eig) else "inf"),
            "is_1o": self.is_1o(),
            "is_2o": self.is_2o(),
        }


def _rank(singular_values):
    if singular_values.size == 0 or singular_values[0] == 0.0:
        return 0
    return int(np.sum(singular_values > RANK_TOLERANCE * singular_values[0]))


def estimate_multiplier(problem, x):
    """Least-squares multiplier argmin_λ ‖∇f(x) + ∇c(x)λ‖.

    Raises RankDeficiencyError when σ_min(∇c(x)) ≤ 1e-10·σ_max.
    """
    x = np.asarray(x, dtype=float)
    if problem.m == 0:
        return np.zeros(0)
    jac = dense_jacobian(problem, x)
    singular_values = np.linalg.svd(jac, compute_uv=False)
    sigma_min = float(singular_values[-1])
    if singular_values[0] == 0.0 or sigma_min <= JACOBIAN_RANK_TOLERANCE * singular_values[0]:
        raise RankDeficiencyError(
            f"constraint Jacobian is rank deficient at x (sigma_min={sigma_min:.3e})", sigma_min
        )
    grad = np.asarray(ensure_finite(problem.gradient(x), "gradient"), dtype=float)
    lam, *_ = np.linalg.lstsq(jac, -grad, rcond=None)
    return lam


def _first_order(problem, x, lam, epsilon):
    if epsilon <= 0:
        raise PreconditionError("certification needs epsilon > 0")
    x = np.asarray(x, dtype=float)
    if isinstance(lam, str):
        if lam != ESTIMATE:
            raise PreconditionError(f"lambda must be an array or '{ESTIMATE}'")
        lam = estimate_multiplier(problem, x)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (problem.m,):
        raise PreconditionError(f"lambda has {lam.size} entries but m={problem.m}")
    stat = float(np.linalg.norm(lagrangian_gradient(problem, x, lam)))
    feas = float(np.linalg.norm(ensure_finite(problem.constraints(x), "constraint value")))
    return x, lam, stat, feas


def check_1o(problem, x, lam, epsilon):
    """First-order certificate; `lam` may be an array or "estimate"."""
    x, lam, stat, feas = _first_order(problem, x, lam, epsilon)
    if problem.m:
        rank = _rank(np.linalg.svd(dense_jacobian(problem, x), compute_uv=False))
    else:
        rank = 0
    return Certificate(
        lambda_used=lam,
        stat_norm=stat,
        feas_norm=feas,
        epsilon=epsilon,
        null_space_dim=problem.n - rank,
    )


def dense_hessian(hvp, n):
    """Symmetrized dense matrix assembled from n unit-vector products."""
    if n > DENSE_THRESHOLD:
        raise UnsupportedSizeError(f"n={n} exceeds the dense threshold {DENSE_THRESHOLD}")
    columns = []
    for i in range(n):
        unit = np.zeros(n)
        unit[i] = 1.0
        columns.append(np.asarray(ensure_finite(hvp(unit), "Hessian-vector product", coordinate=i)))
    matrix = np.column_stack(columns)
    return 0.5 * (matrix + matrix.T)


def tangent_basis(problem, x):
    """Orthonormal basis of S(x) = {d : ∇c(x)ᵀd = 0} (rank tolerance 1e-10·σ_max)."""
    if problem.m == 0:
        return np.eye(problem.n)
    jac = dense_jacobian(problem, x)
    basis = scipy.linalg.null_space(jac.T, rcond=RANK_TOLERANCE)
    log.debug(
        "tangent space at x: n=%d, m=%d, rank=%d, dim=%d",
        problem.n,
        problem.m,
        problem.n - basis.shape[1],
        basis.shape[1],
    )
    return basis


def check_2o(problem, x, lam, epsilon):
    """Full certificate including λ_min(Zᵀ H_L Z) over the tangent space."""
    if problem.n > DENSE_THRESHOLD:
        raise UnsupportedSizeError(f"n={problem.n} exceeds the dense threshold {DENSE_THRESHOLD}")
    x, lam, stat, feas = _first_order(problem, x, lam, epsilon)
    hessian = dense_hessian(lambda d: problem.lagrangian_hvp(x, lam, d), problem.n)
    basis = tangent_basis(problem, x)
    if basis.shape[1] == 0:
        reduced = math.inf
    else:
        reduced = float(scipy.linalg.eigvalsh(basis.T @ hessian @ basis)[0])
    return Certificate(
        lambda_used=lam,
        stat_norm=stat,
        feas_norm=feas,
        epsilon=epsilon,
        null_space_dim=basis.shape[1],
        reduced_min_eig=reduced,
    )


def check_subproblem_2o(sub, x, eps_H):
    """(λ_min(∇²ψ_k(x)) ≥ -ε_H, λ_min) from a dense ∇²ψ_k assembled by prox_hvp."""
    x = np.asarray(x, dtype=float)
    hessian = dense_hessian(lambda d: prox_hvp(sub, x, d), sub.problem.n)
    smallest = float(scipy.linalg.eigvalsh(hessian)[0])
    return smallest >= -eps_H, smallest
