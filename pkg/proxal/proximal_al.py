"""
Proximal augmented Lagrangian module for proxal.

Outer loop of the proximal AL method: each iteration minimizes
ψ_k(x) = L_ρ(x, λ_k) + (β/2)‖x - x_k‖² inexactly with Newton-CG warm-started
at x_k, then sets λ_{k+1} = λ_k + ρc(x_{k+1}). Also houses the classical AL
baseline with safeguarded multipliers, the penalty threshold formula and
the post-run audits.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .aug_lagrangian import (
    ProxSubproblem,
    lagrangian_gradient,
    lyapunov,
    prox_function,
)
from .certify import check_1o, check_2o
from .config import (
    DECREASE_TOL,
    DEFAULT_CLASSIC_RHO,
    DEFAULT_DELTA,
    DEFAULT_GAMMA,
    DEFAULT_INNER_MAX_HVPS,
    DEFAULT_INNER_MAX_ITERS,
    DEFAULT_LAMBDA_BOUND,
    DEFAULT_MAX_OUTER,
    DEFAULT_TAU,
    DEFAULT_ZETA,
    DENSE_THRESHOLD,
    LYAPUNOV_TOL,
)
from .errors import ConfigError, MissingConstantError, PreconditionError
from .newton_cg import BUDGET_EXHAUSTED, InnerTolerances, newton_cg_solve
from .problems import ensure_finite
from .seeding import derive_seed
from .state import (
    CONVERGED_1O,
    CONVERGED_2O,
    INNER_BUDGET_EXHAUSTED,
    MAX_OUTER_REACHED,
    OuterState,
    create_run_record,
)

log = logging.getLogger(__name__)

FIRST_ORDER = "first_order"
SECOND_ORDER = "second_order"


class InnerSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    delta: float = Field(DEFAULT_DELTA, gt=0, lt=1)
    zeta: float = Field(DEFAULT_ZETA, gt=0, lt=1)
    max_iters: int = Field(DEFAULT_INNER_MAX_ITERS, ge=1)
    max_hvps: int = Field(DEFAULT_INNER_MAX_HVPS, ge=1)


class SolverConfig(BaseModel):
    """Validated solver parameters.

    `beta=None` means the default ε^η/2; `rho=None` means the penalty is
    chosen by the caller (ledger threshold or the adaptive framework).
    """

    model_config = ConfigDict(extra="forbid")

    epsilon: float
    eta: float = 2.0
    beta: Optional[float] = Field(None, gt=0)
    rho: Optional[float] = Field(None, gt=0)
    rho0: float = Field(0.0, ge=0)
    mode: Literal["first_order", "second_order"] = FIRST_ORDER
    inner: InnerSettings = Field(default_factory=InnerSettings)
    max_outer: int = Field(DEFAULT_MAX_OUTER, ge=1)
    seed: int = Field(0, ge=0, le=2**64 - 1)
    lambda0: Optional[List[float]] = None
    tau: float = Field(DEFAULT_TAU, gt=0, lt=1)
    gamma: float = Field(DEFAULT_GAMMA, gt=1)
    lambda_min: float = -DEFAULT_LAMBDA_BOUND
    lambda_max: float = DEFAULT_LAMBDA_BOUND
    audit: bool = False

    @field_validator("epsilon")
    @classmethod
    def epsilon_in_range(cls, value):
        if not (0 < value <= 1):
            raise ValueError("epsilon must lie in the valid range (0,1]")
        return value

    @field_validator("eta")
    @classmethod
    def eta_in_range(cls, value):
        if not (0 <= value <= 2):
            raise ValueError("eta must lie in the valid range [0,2]")
        return value

    @model_validator(mode="after")
    def check_combinations(self):
        if self.mode == SECOND_ORDER and self.eta < 1:
            raise ValueError("eta must lie in the valid range [1,2] in second_order mode")
        if self.lambda_min > self.lambda_max:
            raise ValueError("lambda_min must not exceed lambda_max")
        return self

    @property
    def beta_value(self):
        return default_beta(self.epsilon, self.eta) if self.beta is None else self.beta

    @property
    def second_order(self):
        return self.mode == SECOND_ORDER

    def initial_multiplier(self, m):
        if self.lambda0 is None:
            return np.zeros(m)
        lam = np.array(self.lambda0, dtype=float)
        if lam.shape != (m,):
            raise ConfigError(f"lambda0 has {lam.size} entries but the problem has m={m}")
        return lam


def default_beta(epsilon, eta):
    return epsilon**eta / 2.0


def tolerance_schedule(k, epsilon, mode):
    """(ε_k^g, ε_k^H) = (min{1/k, ε/2}, √ε/2) in first-order mode, ε/2 for ε_k^H otherwise."""
    if k < 1:
        raise PreconditionError("tolerance_schedule needs k >= 1")
    eps_g = min(1.0 / k, epsilon / 2.0)
    eps_H = math.sqrt(epsilon) / 2.0 if mode == FIRST_ORDER else epsilon / 2.0
    return eps_g, eps_H


def stopping_check(problem, x, lam, epsilon):
    """True iff ‖∇f + ∇cλ‖ ≤ ε and ‖c(x)‖ ≤ ε; both norms are returned either way."""
    stat = float(np.linalg.norm(lagrangian_gradient(problem, x, lam)))
    feas = float(np.linalg.norm(ensure_finite(problem.constraints(x), "constraint value")))
    return (stat <= epsilon and feas <= epsilon), stat, feas


def multiplier_update(lam, rho, c_val):
    return np.asarray(lam, dtype=float) + rho * np.asarray(c_val, dtype=float)


def project_multiplier(lam, lambda_min, lambda_max):
    """P_Λ: componentwise projection onto [Λ_min, Λ_max]^m."""
    return np.clip(np.asarray(lam, dtype=float), lambda_min, lambda_max)


def penalty_update(k, c_new_inf, c_old_inf, rho, tau, gamma):
    """Keep ρ when k = 0 or ‖c(x_{k+1})‖_∞ ≤ τ‖c(x_k)‖_∞, else multiply by γ."""
    if k == 0 or c_new_inf <= tau * c_old_inf:
        return rho
    return gamma * rho


def terminal_certificate(problem, x, lam, config):
    """Certificate at the output point using the solver's own multiplier."""
    if config.second_order:
        if problem.n <= DENSE_THRESHOLD:
            return check_2o(problem, x, lam, config.epsilon)
        log.warning("n=%d exceeds the dense threshold; reporting a first-order certificate", problem.n)
    return check_1o(problem, x, lam, config.epsilon)


def _inner_tolerances(config, k, max_iters=None):
    eps_g, eps_H = tolerance_schedule(k, config.epsilon, config.mode)
    return InnerTolerances(
        eps_g=eps_g,
        eps_H=eps_H,
        delta=config.inner.delta,
        zeta=config.inner.zeta,
        max_iters=max_iters or config.inner.max_iters,
        max_hvps=config.inner.max_hvps,
    )


def _log_row(row):
    log.info(
        "k=%4d  |gradL0|=%.3e  |c|=%.3e  |dx|=%.3e  inner=%5d  hvps=%7d",
        row.k,
        row.stat_norm,
        row.feas_norm,
        row.dx_norm,
        row.inner_iters,
        row.hvp_count,
    )


def _outer_loop(problem, config, x0, lam0, rho, beta, next_multiplier, next_rho, inner_max_iters=None):
    """Shared outer loop; the two methods differ in the multiplier and penalty rules."""
    started = time.perf_counter()
    x = np.array(x0, dtype=float)
    ensure_finite(x, "start point")
    if x.shape != (problem.n,):
        raise PreconditionError(f"start point has {x.size} entries but n={problem.n}")
    lam = np.array(lam0, dtype=float)
    record = create_run_record(
        x, lam, rho, beta, config.seed, config.mode, config.audit, config.model_dump(mode="json")
    )
    c_old = np.asarray(ensure_finite(problem.constraints(x), "constraint value"), dtype=float)
    status = MAX_OUTER_REACHED

    for k in range(config.max_outer):
        tol = _inner_tolerances(config, k + 1, inner_max_iters)
        sub = ProxSubproblem(problem, lam, rho, beta, x)
        inner = newton_cg_solve(
            prox_function(sub), x, tol, config.second_order, seed=derive_seed(config.seed, k)
        )
        x_new = inner.z
        c_new = np.asarray(ensure_finite(problem.constraints(x_new), "constraint value"), dtype=float)
        lam_new = next_multiplier(lam, rho, c_new)
        stop, stat, feas = stopping_check(problem, x_new, lam_new, config.epsilon)
        row = OuterState(
            k=k + 1,
            stat_norm=stat,
            feas_norm=feas,
            dx_norm=float(np.linalg.norm(x_new - x)),
            dlambda_norm=float(np.linalg.norm(lam_new - lam)),
            P=lyapunov(problem, rho, beta, x_new, x, lam_new),
            inner_iters=inner.iterations,
            hvp_count=inner.hvp_count,
            eps_g=tol.eps_g,
            eps_H=tol.eps_H,
            r_tilde_norm=inner.grad_norm,
            inner_status=inner.status,
            psi_start=inner.start_value,
            psi_end=inner.value,
            rho=rho,
        )
        if config.audit:
            row.x, row.lam, row.x_prev, row.lam_prev = x_new, lam_new, x, lam
        record.rows.append(row)
        _log_row(row)

        rho_next = next_rho(k, c_new, c_old, rho)
        x, lam, c_old = x_new, lam_new, c_new
        if stop:
            status = CONVERGED_2O if config.second_order else CONVERGED_1O
            record.stop_index = k + 1
            break
        if inner.status == BUDGET_EXHAUSTED:
            status = INNER_BUDGET_EXHAUSTED
            break
        rho = rho_next

    record.status = status
    record.x_final = x
    record.lam_final = lam
    record.wall_time = time.perf_counter() - started
    log.info(
        "outer loop finished: %s after %d iterations (%d inner, %d hvps)",
        status,
        record.outer_iterations,
        record.inner_iterations,
        record.hvp_total,
    )
    return record


def proximal_al_solve(problem, config, x0, inner_max_iters=None):
    """Run the proximal AL method with the fixed penalty `config.rho`.

    Returns (RunRecord, Certificate). Inner budget exhaustion ends the run
    with status inner_budget_exhausted and a partial record, unless that
    row already meets the stopping rule. An inner solve that stops at
    working precision does not end the run.
    """
    if config.rho is None:
        raise ConfigError("proximal_al_solve needs a fixed rho; use solve() to pick one")
    beta = config.beta_value
    if config.beta is not None and config.beta != default_beta(config.epsilon, config.eta):
        log.warning(
            "beta=%.3e overrides the default eps^eta/2=%.3e; complexity guarantees assume the default",
            config.beta,
            default_beta(config.epsilon, config.eta),
        )
    record = _outer_loop(
        problem,
        config,
        x0,
        config.initial_multiplier(problem.m),
        config.rho,
        beta,
        next_multiplier=multiplier_update,
        next_rho=lambda k, c_new, c_old, rho: rho,
        inner_max_iters=inner_max_iters,
    )
    return record, terminal_certificate(problem, record.x_final, record.lam_final, config)


def classic_al_solve(problem, config, x0):
    """Classical AL baseline: β = 0, safeguarded multipliers and the τ/γ penalty rule."""
    lam0 = config.initial_multiplier(problem.m)
    if np.any(lam0 < config.lambda_min) or np.any(lam0 > config.lambda_max):
        raise PreconditionError("lambda0 must lie in [lambda_min, lambda_max] componentwise")
    rho0 = DEFAULT_CLASSIC_RHO if config.rho is None else config.rho

    def next_multiplier(lam, rho, c_new):
        return project_multiplier(multiplier_update(lam, rho, c_new), config.lambda_min, config.lambda_max)

    def next_rho(k, c_new, c_old, rho):
        return penalty_update(
            k,
            float(np.max(np.abs(c_new), initial=0.0)),
            float(np.max(np.abs(c_old), initial=0.0)),
            rho,
            config.tau,
            config.gamma,
        )

    record = _outer_loop(problem, config, x0, lam0, rho0, 0.0, next_multiplier, next_rho)
    return record, terminal_certificate(problem, record.x_final, record.lam_final, config)


@dataclass
class AuditViolation:
    k: int
    lhs: float
    rhs: float


def lyapunov_descent_audit(record, problem=None, config=None):
    """Rows where P_{k+1} - P_k exceeds (1/ρ)‖Δλ_{k+1}‖² - (β/4)(‖Δx_{k+1}‖² + ‖Δx_k‖²).

    Works from the recorded P, ‖Δx‖ and ‖Δλ‖ columns; a slack of
    1e-8(1 + |P_k|) absorbs rounding.
    """
    beta = record.beta if config is None else config.beta_value
    violations = []
    for prev, row in zip(record.rows, record.rows[1:]):
        lhs = row.P - prev.P
        rhs = (
            row.dlambda_norm**2 / row.rho
            - 0.25 * beta * (row.dx_norm**2 + prev.dx_norm**2)
            + LYAPUNOV_TOL * (1.0 + abs(prev.P))
        )
        if lhs > rhs:
            violations.append(AuditViolation(prev.k, lhs, rhs))
    return violations


def kkt_residual_audit(record, problem, config=None):
    """Max over k of |‖∇f(x_k) + ∇c(x_k)λ_k + β(x_k - x_{k-1})‖ - ‖r̃_k‖| / (1 + ‖∇f(x_k)‖)."""
    if not record.audit:
        raise PreconditionError("kkt_residual_audit needs a record produced in audit mode")
    beta = record.beta if config is None else config.beta_value
    worst = 0.0
    for row in record.rows:
        residual = lagrangian_gradient(problem, row.x, row.lam) + beta * (row.x - row.x_prev)
        scale = 1.0 + float(np.linalg.norm(problem.gradient(row.x)))
        worst = max(worst, abs(float(np.linalg.norm(residual)) - row.r_tilde_norm) / scale)
    return worst


def multiplier_identity_audit(record, problem, config=None):
    """Max of ‖λ_k - λ_{k-1} - ρc(x_k)‖ / (‖λ_k‖ + ρ‖c(x_k)‖) over the stored rows."""
    if not record.audit:
        raise PreconditionError("multiplier_identity_audit needs a record produced in audit mode")
    worst = 0.0
    for row in record.rows:
        c = np.asarray(problem.constraints(row.x), dtype=float)
        gap = float(np.linalg.norm(row.lam - row.lam_prev - row.rho * c))
        scale = float(np.linalg.norm(row.lam)) + row.rho * float(np.linalg.norm(c))
        if gap > 0:
            worst = max(worst, gap / scale if scale > 0 else gap)
    return worst


def decrease_audit(record):
    """Iterations where ψ_k(x_{k+1}) > ψ_k(x_k) + 1e-12(1 + |ψ_k(x_k)|)."""
    return [
        row.k
        for row in record.rows
        if row.psi_end > row.psi_start + DECREASE_TOL * (1.0 + abs(row.psi_start))
    ]


def stop_index_audit(record, epsilon=None):
    """Confirm stop_index is the first row meeting the stopping rule (None when no row does)."""
    if epsilon is None:
        epsilon = record.config["epsilon"]
    first = next(
        (row.k for row in record.rows if row.stat_norm <= epsilon and row.feas_norm <= epsilon),
        None,
    )
    return first == record.stop_index


def rho_lower_bound(ledger, epsilon, eta, beta, d_s, lambda0=None):
    """Penalty threshold ρ_η from the constants ledger.

    ρ_η = max{16 max{C₁, C₂}/ε^η, (M_f + βD_S + 1)²/(2σ²) + ρ₀, ‖λ₀‖²/2 + ρ₀,
    16(M_c² + σ²)R/σ⁴, 3ρ₀, 1} with C₁ = (4/σ²)(L_f + L_cM_f/σ + β)² and
    C₂ = (4/σ²)(β + 2M_cβ/σ)².
    """
    M_f, L_f, M_c, L_c, sigma, rho0, R = ledger.require("M_f", "L_f", "M_c", "L_c", "sigma", "rho0", "R")
    if d_s is None:
        raise MissingConstantError("D_S")
    lam_sq = 0.0 if lambda0 is None else float(np.dot(lambda0, lambda0))
    c1 = 4.0 / sigma**2 * (L_f + L_c * M_f / sigma + beta) ** 2
    c2 = 4.0 / sigma**2 * (beta + 2.0 * M_c * beta / sigma) ** 2
    return max(
        16.0 * max(c1, c2) / epsilon**eta,
        (M_f + beta * d_s + 1.0) ** 2 / (2.0 * sigma**2) + rho0,
        lam_sq / 2.0 + rho0,
        16.0 * (M_c**2 + sigma**2) * R / sigma**4,
        3.0 * rho0,
        1.0,
    )
