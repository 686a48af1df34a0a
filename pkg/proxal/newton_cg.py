"""
Newton-CG module for proxal.

Matrix-free inner solver for min_z F(z): capped conjugate gradient on the
shifted Newton system (∇²F + 2ε_H I)d = -∇F, a randomized Lanczos minimum
eigenvalue oracle (MEO) once the gradient is small, and backtracking line
searches. Every Hessian-vector product is counted so the totals can be held
against the operation-complexity envelope.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .config import (
    ARMIJO,
    DEFAULT_DELTA,
    DEFAULT_INNER_MAX_HVPS,
    DEFAULT_INNER_MAX_ITERS,
    DEFAULT_ZETA,
    LIPSCHITZ_INIT,
    MAX_BACKTRACKS,
    NC_DECREASE,
    NC_RELAXATION,
    POWER_ITERATIONS,
    PRECISION_DECREASE,
)
from .errors import BudgetExhaustedError, EvaluationError, PreconditionError
from .seeding import make_rng

log = logging.getLogger(__name__)

FIRST_ORDER_MET = "first_order_met"
SECOND_ORDER_MET = "second_order_met"
BUDGET_EXHAUSTED = "budget_exhausted"
PRECISION_LIMIT = "precision_limit"


@dataclass(frozen=True)
class InnerTolerances:
    """Stopping tolerances, MEO failure probability, CG accuracy and budgets of one inner solve."""

    eps_g: float
    eps_H: float
    delta: float = DEFAULT_DELTA
    zeta: float = DEFAULT_ZETA
    max_iters: int = DEFAULT_INNER_MAX_ITERS
    max_hvps: int = DEFAULT_INNER_MAX_HVPS

    def __post_init__(self):
        if not (self.eps_g > 0 and self.eps_H > 0):
            raise PreconditionError("eps_g and eps_H must be positive")
        if not (0 < self.delta < 1 and 0 < self.zeta < 1):
            raise PreconditionError("delta and zeta must lie in (0, 1)")
        if self.max_iters < 1 or self.max_hvps < 1:
            raise PreconditionError("inner budgets must be at least 1")


@dataclass
class InnerResult:
    """Terminal point, counters and operation-complexity bookkeeping of one inner solve.

    `status` is first_order_met, second_order_met, budget_exhausted or
    precision_limit (F stopped resolving the predicted decrease before
    ‖∇F‖ reached ε_g).
    """

    z: np.ndarray
    grad_norm: float
    decrease: float
    iterations: int
    hvp_count: int
    meo_calls: int
    status: str
    neg_curvature_certified_absent: bool
    value: float
    start_value: float
    u_est: float
    j_bound: int
    n_meo: int
    hvp_envelope: int


@dataclass
class CGResult:
    """Outcome of one capped CG call.

    `kind` is "solution" (approximate shifted Newton step) or
    "negative_curvature" (unit direction with dᵀHd ≤ -ε_H, curvature set).
    """

    kind: str
    direction: np.ndarray
    curvature: Optional[float]
    hvp_count: int
    residual_norm: float
    u_est: float


@dataclass
class EigenResult:
    """MEO outcome: a certificate, or a unit direction with its Rayleigh quotient."""

    certified: bool
    direction: Optional[np.ndarray]
    curvature: float
    hvp_count: int


def j_bound(u, eps_H, zeta):
    """⌈(√κ + ½) log(144(√κ+1)²κ⁶/ζ²)⌉ with κ = (u + 2ε_H)/ε_H."""
    kappa = (u + 2.0 * eps_H) / eps_H
    root = math.sqrt(kappa)
    return int(math.ceil((root + 0.5) * math.log(144.0 * (root + 1.0) ** 2 * kappa**6 / zeta**2)))


def n_meo(n, eps_H, delta):
    """Lanczos steps per MEO call: min{n, 1 + ⌈C_meo ε_H^(-1/2)⌉}, C_meo = ln(2.75n/δ²)/2."""
    c_meo = 0.5 * math.log(2.75 * n / delta**2)
    return int(min(n, 1 + math.ceil(c_meo / math.sqrt(eps_H))))


def hvp_envelope(n, u, eps_H, zeta, delta, iterations):
    """Hessian-vector-product envelope (max{2 min{n, J} + 2, N_meo})·iterations."""
    per_iteration = max(2 * min(n, j_bound(u, eps_H, zeta)) + 2, n_meo(n, eps_H, delta))
    return per_iteration * iterations


def estimate_hessian_norm(hvp, n, rng, iters=POWER_ITERATIONS):
    """Power-iteration estimate of ‖H‖; returns (estimate, products used)."""
    rng = make_rng(rng)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    used = 0
    for _ in range(min(iters, n)):
        w = np.asarray(hvp(v), dtype=float)
        used += 1
        norm = float(np.linalg.norm(w))
        if not math.isfinite(norm):
            raise EvaluationError("non-finite Hessian-vector product in power iteration")
        estimate = max(estimate, norm)
        if norm == 0.0:
            break
        v = w / norm
    return estimate, used


def capped_cg(hvp, g, eps_H, zeta, budget, u_est=0.0, n=None):
    """Capped CG on (H + 2ε_H I)d = -g.

    Stops with a solution when ‖r‖ ≤ ζ̂‖g‖ (ζ̂ = ζ/(3κ)), or with a negative
    curvature direction as soon as a search direction p or the iterate y has
    curvature below ε_H‖·‖² under the shifted operator. At most
    min{n + 2, J} products are spent; hitting the cap returns the current
    iterate, which is a descent direction. Raises BudgetExhaustedError when
    `budget` runs out first.
    """
    g = np.asarray(g, dtype=float)
    n = g.size if n is None else n
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        raise PreconditionError("capped_cg needs a nonzero gradient")
    if budget < 1:
        raise BudgetExhaustedError("no Hessian-vector products left for capped CG")

    shift = 2.0 * eps_H
    kappa = (u_est + shift) / eps_H
    zeta_hat = zeta / (3.0 * kappa)
    cap = min(n + 2, j_bound(u_est, eps_H, zeta))

    y = np.zeros_like(g)
    r = g.copy()
    p = -g
    r_sq = g_norm**2
    used = 0
    while True:
        if used >= budget:
            raise BudgetExhaustedError(
                "Hessian-vector budget exhausted inside capped CG", partial=y, hvp_count=used
            )
        hp = np.asarray(hvp(p), dtype=float)
        used += 1
        if not np.all(np.isfinite(hp)):
            raise EvaluationError("non-finite Hessian-vector product in capped CG")
        p_sq = float(p @ p)
        raw = float(p @ hp)
        u_est = max(u_est, abs(raw) / p_sq)
        p_curv = raw + shift * p_sq
        if p_curv < eps_H * p_sq:
            return CGResult(
                "negative_curvature", p / math.sqrt(p_sq), raw / p_sq, used, math.sqrt(r_sq), u_est
            )
        alpha = r_sq / p_curv
        y = y + alpha * p
        r = r + alpha * (hp + shift * p)
        # H̄y = r - g
        y_sq = float(y @ y)
        y_curv = float(y @ (r - g))
        if y_curv < eps_H * y_sq:
            # yᵀHy = yᵀH̄y - 2ε_H‖y‖²
            return CGResult(
                "negative_curvature",
                y / math.sqrt(y_sq),
                (y_curv - shift * y_sq) / y_sq,
                used,
                math.sqrt(r_sq),
                u_est,
            )
        r_sq_new = float(r @ r)
        if math.sqrt(r_sq_new) <= zeta_hat * g_norm or used >= cap:
            return CGResult("solution", y, None, used, math.sqrt(r_sq_new), u_est)
        p = -r + (r_sq_new / r_sq) * p
        r_sq = r_sq_new


def min_eig_oracle(hvp, n, eps_H, delta, seed):
    """Randomized Lanczos MEO with full reorthogonalization.

    Runs N_meo steps from a uniformly random unit vector. Returns a unit
    negative curvature direction when the smallest Ritz value is at most
    -ε_H/2, otherwise certifies H ⪰ -ε_H I (wrong with probability ≤ δ).
    """
    rng = make_rng(seed)
    steps = n_meo(n, eps_H, delta)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    basis = [v]
    alphas, betas = [], []
    used = 0
    for j in range(steps):
        w = np.asarray(hvp(basis[j]), dtype=float)
        used += 1
        if not np.all(np.isfinite(w)):
            raise EvaluationError("non-finite Hessian-vector product in Lanczos")
        alphas.append(float(basis[j] @ w))
        V = np.column_stack(basis)
        w = w - V @ (V.T @ w)
        w = w - V @ (V.T @ w)
        beta = float(np.linalg.norm(w))
        if j == steps - 1 or beta <= 1e-12 * max(1.0, abs(alphas[-1])):
            break
        betas.append(beta)
        basis.append(w / beta)

    k = len(alphas)
    if k == 1:
        ritz_values, ritz_vectors = np.array(alphas), np.ones((1, 1))
    else:
        ritz_values, ritz_vectors = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas[: k - 1]))
    theta = float(ritz_values[0])
    if theta <= -0.5 * eps_H:
        direction = np.column_stack(basis[:k]) @ ritz_vectors[:, 0]
        direction /= np.linalg.norm(direction)
        log.debug("MEO found curvature %.3e after %d steps", theta, used)
        return EigenResult(False, direction, theta, used)
    log.debug("MEO certified smallest Ritz value %.3e after %d steps", theta, used)
    return EigenResult(True, None, theta, used)


def _finite_value(F, z):
    try:
        value = float(F.value(z))
    except EvaluationError:
        return math.inf
    return value if math.isfinite(value) else math.inf


def _finite_grad_norm(F, z):
    try:
        g = np.asarray(F.gradient(z), dtype=float)
    except EvaluationError:
        return math.inf
    norm = float(np.linalg.norm(g))
    return norm if math.isfinite(norm) else math.inf


def _below_precision(predicted, value):
    return predicted <= PRECISION_DECREASE * (1.0 + abs(value))


def _armijo_step(F, z, value, g, d):
    slope = float(g @ d)
    t = 1.0
    for _ in range(MAX_BACKTRACKS):
        trial = z + t * d
        trial_value = _finite_value(F, trial)
        if trial_value <= value + ARMIJO * t * slope and trial_value < value:
            return trial, trial_value
        t *= 0.5
    return None, value


def _precision_step(F, z, value, grad_norm, d):
    """Full step taken when F cannot resolve the decrease: F must not rise and ‖∇F‖ must drop."""
    trial = z + d
    trial_value = _finite_value(F, trial)
    if trial_value <= value and _finite_grad_norm(F, trial) < grad_norm:
        return trial, trial_value
    return None, value


class _CurvatureStepper:
    """Negative curvature steps with a Lipschitz estimate L_H that persists within a solve."""

    def __init__(self, eps_H):
        self.eps_H = eps_H
        self.lipschitz = LIPSCHITZ_INIT

    def step(self, F, z, value, g, direction, curvature):
        u = direction if float(g @ direction) <= 0 else -direction
        coefficient = NC_DECREASE * self.eps_H
        for _ in range(MAX_BACKTRACKS):
            t = abs(curvature) / self.lipschitz
            trial = z + t * u
            trial_value = _finite_value(F, trial)
            if trial_value <= value - coefficient * t**3 and trial_value < value:
                return trial, trial_value
            coefficient = NC_DECREASE * self.eps_H / NC_RELAXATION
            self.lipschitz *= 2.0
        # steepest descent is the fallback once the cubic model keeps failing
        return _armijo_step(F, z, value, g, -g)


def newton_cg_solve(F, z0, tol, second_order, seed=0):
    """Minimize F from z0 until ‖∇F‖ ≤ ε_g (and, in second-order mode, the MEO certifies).

    Accepted steps never increase F, so F(z) ≤ F(z0) at termination. When a
    Newton step's predicted decrease falls below the rounding level of F and
    backtracking finds nothing, the full step is still taken if it lowers
    ‖∇F‖ without raising F; otherwise the point is treated as stationary to
    working precision (status precision_limit, after the MEO in second-order
    mode). Budget exhaustion is reported through the status, never raised.
    """
    rng = make_rng(seed)
    z = np.array(z0, dtype=float)
    if not np.all(np.isfinite(z)):
        raise PreconditionError("newton_cg_solve needs a finite start point")
    n = z.size
    value = float(F.value(z))
    if not math.isfinite(value):
        raise EvaluationError("non-finite objective at the inner start point")
    start_value = value
    meo_steps = n_meo(n, tol.eps_H, tol.delta)
    stepper = _CurvatureStepper(tol.eps_H)

    iterations = 0
    hvps = 0
    meo_calls = 0
    u_est = None
    certified = False
    at_precision = False

    def hvp_at(point):
        return lambda d: F.hvp(point, d)

    while True:
        g = np.asarray(F.gradient(z), dtype=float)
        if not np.all(np.isfinite(g)):
            raise EvaluationError("non-finite gradient at an accepted inner iterate")
        grad_norm = float(np.linalg.norm(g))

        if grad_norm <= tol.eps_g or at_precision:
            met = grad_norm <= tol.eps_g
            if not second_order:
                status = FIRST_ORDER_MET if met else PRECISION_LIMIT
                break
            if iterations >= tol.max_iters or hvps + meo_steps > tol.max_hvps:
                status = BUDGET_EXHAUSTED
                break
            eig = min_eig_oracle(hvp_at(z), n, tol.eps_H, tol.delta, rng)
            hvps += eig.hvp_count
            meo_calls += 1
            iterations += 1
            if eig.certified:
                certified = True
                status = SECOND_ORDER_MET if met else PRECISION_LIMIT
                break
            new_z, new_value = stepper.step(F, z, value, g, eig.direction, eig.curvature)
        else:
            if iterations >= tol.max_iters:
                status = BUDGET_EXHAUSTED
                break
            if u_est is None:
                u_est, used = estimate_hessian_norm(hvp_at(z), n, rng)
                hvps += used
            iterations += 1
            try:
                cg = capped_cg(hvp_at(z), g, tol.eps_H, tol.zeta, tol.max_hvps - hvps, u_est, n)
            except BudgetExhaustedError as exc:
                hvps += exc.hvp_count
                status = BUDGET_EXHAUSTED
                break
            hvps += cg.hvp_count
            u_est = cg.u_est
            if cg.kind == "solution":
                d = cg.direction if float(g @ cg.direction) < 0 else -g
                new_z, new_value = _armijo_step(F, z, value, g, d)
                if new_z is None and _below_precision(-float(g @ d), value):
                    new_z, new_value = _precision_step(F, z, value, grad_norm, d)
                    if new_z is None:
                        log.info("inner decrease below working precision at |g|=%.3e", grad_norm)
                        at_precision = True
                        continue
            else:
                new_z, new_value = stepper.step(F, z, value, g, cg.direction, cg.curvature)

        if new_z is None:
            log.warning(
                "inner line search stalled at iteration %d (|g|=%.3e); stopping", iterations, grad_norm
            )
            status = BUDGET_EXHAUSTED
            break
        log.debug("inner %4d  F=%.12e  |g|=%.3e  hvps=%d", iterations, new_value, grad_norm, hvps)
        z, value = new_z, new_value
        at_precision = False

    u_final = 0.0 if u_est is None else u_est
    return InnerResult(
        z=z,
        grad_norm=grad_norm,
        decrease=start_value - value,
        iterations=iterations,
        hvp_count=hvps,
        meo_calls=meo_calls,
        status=status,
        neg_curvature_certified_absent=certified,
        value=value,
        start_value=start_value,
        u_est=u_final,
        j_bound=j_bound(u_final, tol.eps_H, tol.zeta),
        n_meo=meo_steps,
        hvp_envelope=hvp_envelope(n, u_final, tol.eps_H, tol.zeta, tol.delta, iterations),
    )
