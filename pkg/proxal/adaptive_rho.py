"""
Adaptive penalty module for proxal.

Trial-ρ framework: for τ = 1, 2, ... run the proximal AL method with the
geometric penalty ρ_τ for at most T_τ outer iterations from a near-feasible
start z_τ, resetting the multiplier to Λ₀, and stop the whole framework on
the first trial that meets the stopping rule. Also houses the Phase-I
feasibility solve on ‖c(x)‖² and the top-level `solve` dispatcher.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .aug_lagrangian import feasibility_function
from .config import DEFAULT_C0, DEFAULT_Q, DEFAULT_T0, DEFAULT_TRIAL_CAP
from .errors import PreconditionError
from .newton_cg import BUDGET_EXHAUSTED, InnerTolerances, newton_cg_solve
from .proximal_al import InnerSettings, proximal_al_solve, rho_lower_bound
from .seeding import derive_seed
from .state import merge_records

log = logging.getLogger(__name__)

MAX_TRIALS_REACHED = "max_trials_reached"
PHASE1_INFEASIBLE = "phase1_infeasible"
PHASE1_BUDGET_EXHAUSTED = "phase1_budget_exhausted"
PHASE1_FEASIBLE = "feasible"
PHASE1_CRITICAL = "infeasible_critical"


@dataclass(frozen=True)
class AdaptiveSchedule:
    q: float = DEFAULT_Q
    T0: int = DEFAULT_T0
    eta: float = 2.0
    epsilon: float = 1e-3
    lambda0: Optional[tuple] = None

    def __post_init__(self):
        if not self.q > 1:
            raise PreconditionError(f"q must exceed 1, got {self.q}")
        if self.T0 < 1:
            raise PreconditionError(f"T0 must be a positive integer, got {self.T0}")
        if not 0 <= self.eta <= 2:
            raise PreconditionError("eta must lie in the valid range [0,2]")
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")


def _ceil(value):
    # q^τ ε^p carries rounding noise; 500.0000000001 must still ceil to 500
    return int(math.ceil(value * (1.0 - 1e-12)))


def schedule(tau, sched):
    """(ρ_τ, T_τ) for trial τ ≥ 1."""
    if tau < 1:
        raise PreconditionError("schedule needs tau >= 1")
    growth = sched.q**tau
    eta, eps = sched.eta, sched.epsilon
    if eta < 1:
        return max(growth * eps ** (2 - 2 * eta), 1.0), _ceil(sched.T0 * growth) + 1
    if eta == 1:
        return growth, _ceil(sched.T0 * growth) + 1
    return growth, max(_ceil(sched.T0 * growth * eps ** (2 * eta - 2)) + 1, sched.T0)


def predicted_trials(epsilon, eta, q):
    """Leading term log_q(ε^{min{η-2, -η}}) of the trial-count bound."""
    return min(eta - 2.0, -eta) * math.log(epsilon) / math.log(q)


@dataclass
class Phase1Result:
    """Phase-I outcome; `status` is feasible, infeasible_critical or budget_exhausted."""

    x: np.ndarray
    feasible: bool
    c_norm: float
    threshold: float
    inner: object
    status: str = PHASE1_FEASIBLE

    @property
    def infeasible_critical(self):
        return self.status == PHASE1_CRITICAL


def phase1_feasibility(problem, x_init, rho, epsilon, c0=DEFAULT_C0, inner=None, seed=0):
    """Minimize ‖c(x)‖² until ‖2∇c(x)c(x)‖ ≤ min{ε, √(C₀/ρ), 1}.

    The result is feasible when ‖c(x̄)‖ ≤ min{√(C₀/ρ), 1}. An infeasible x̄ is
    an approximate infeasible critical point only when the inner solve
    terminated; one that ran out of budget is reported as budget_exhausted.
    """
    if not (rho > 0 and epsilon > 0 and c0 > 0):
        raise PreconditionError("phase1_feasibility needs rho, epsilon and C0 positive")
    inner = inner or InnerSettings()
    threshold = min(math.sqrt(c0 / rho), 1.0)
    eps_g = min(epsilon, threshold)
    tol = InnerTolerances(
        eps_g=eps_g,
        eps_H=math.sqrt(eps_g),
        delta=inner.delta,
        zeta=inner.zeta,
        max_iters=inner.max_iters,
        max_hvps=inner.max_hvps,
    )
    result = newton_cg_solve(feasibility_function(problem), x_init, tol, second_order=False, seed=seed)
    c_norm = float(np.linalg.norm(problem.constraints(result.z)))
    feasible = c_norm <= threshold
    if feasible:
        status = PHASE1_FEASIBLE
    elif result.status == BUDGET_EXHAUSTED:
        status = BUDGET_EXHAUSTED
        log.warning("Phase I ran out of inner budget at |c|=%.3e > %.3e", c_norm, threshold)
    else:
        status = PHASE1_CRITICAL
        log.warning(
            "Phase I ended at an infeasible critical point: |c|=%.3e > %.3e (inner status %s)",
            c_norm,
            threshold,
            result.status,
        )
    return Phase1Result(
        x=result.z, feasible=feasible, c_norm=c_norm, threshold=threshold, inner=result, status=status
    )


@dataclass
class AdaptiveResult:
    record: object
    certificate: object
    tau_final: int
    status: str
    aggregate: object
    trials: List[dict] = field(default_factory=list)
    predicted_trials: float = 0.0


def adaptive_solve(
    problem,
    config,
    sched,
    x_init,
    z_provider=None,
    trial_cap=DEFAULT_TRIAL_CAP,
    c0=DEFAULT_C0,
    inner_cap0=None,
):
    """Run trials τ = 1, 2, ... until one converges or `trial_cap` is spent.

    `z_provider(tau)` may supply the start point of each trial; by default
    Phase I is run from the previous trial's terminal point (x_init first).
    With `inner_cap0` set, trial τ caps Newton-CG at ⌈inner_cap0·q^τ⌉
    iterations. A Phase I that stops short of feasibility ends the framework
    with phase1_infeasible (critical point) or phase1_budget_exhausted.
    """
    lam0 = (
        config.initial_multiplier(problem.m)
        if sched.lambda0 is None
        else np.array(sched.lambda0, dtype=float)
    )
    previous = np.array(x_init, dtype=float)
    records, trials = [], []
    record = certificate = None
    status = MAX_TRIALS_REACHED
    tau = 0

    for tau in range(1, trial_cap + 1):
        rho, budget = schedule(tau, sched)
        if z_provider is None:
            phase1 = phase1_feasibility(
                problem,
                previous,
                rho,
                config.epsilon,
                c0=c0,
                inner=config.inner,
                seed=derive_seed(config.seed, tau, 0),
            )
            if not phase1.feasible:
                status = PHASE1_INFEASIBLE if phase1.infeasible_critical else PHASE1_BUDGET_EXHAUSTED
                previous = phase1.x
                break
            start = phase1.x
        else:
            start = np.array(z_provider(tau), dtype=float)

        trial_config = config.model_copy(
            update={
                "rho": rho,
                "max_outer": budget,
                "lambda0": [float(v) for v in lam0],
                "seed": derive_seed(config.seed, tau),
            }
        )
        inner_cap = None if inner_cap0 is None else _ceil(inner_cap0 * sched.q**tau)
        record, certificate = proximal_al_solve(problem, trial_config, start, inner_max_iters=inner_cap)
        records.append(record)
        trials.append(
            {
                "tau": tau,
                "rho": rho,
                "T": budget,
                "status": record.status,
                "stop_index": record.stop_index,
                "lambda_start": [float(v) for v in record.lambda0],
                "outer_iterations": record.outer_iterations,
                "inner_iterations": record.inner_iterations,
                "hvps": record.hvp_total,
            }
        )
        log.info("trial %d: rho=%.3e T=%d -> %s", tau, rho, budget, record.status)
        if record.converged:
            status = record.status
            break
        previous = record.x_final

    aggregate = merge_records(records, status, record.stop_index if record is not None else None)
    aggregate.trials = trials
    if record is None:
        aggregate.x_final = previous
    return AdaptiveResult(
        record=record,
        certificate=certificate,
        tau_final=tau,
        status=status,
        aggregate=aggregate,
        trials=trials,
        predicted_trials=predicted_trials(config.epsilon, sched.eta, sched.q),
    )


@dataclass
class SolveResult:
    record: object
    certificate: object
    aggregate: object
    rho: Optional[float]
    policy: str
    adaptive: Optional[AdaptiveResult] = None

    @property
    def status(self):
        return self.aggregate.status


def solve(problem, config, x0, ledger=None, d_s=None, sched=None, **adaptive_options):
    """Apply the penalty policy: fixed ρ if set, else ρ_η from a complete ledger, else adaptive."""
    if config.rho is not None:
        record, certificate = proximal_al_solve(problem, config, x0)
        return SolveResult(record, certificate, record, config.rho, "fixed")
    if ledger is not None:
        rho = rho_lower_bound(ledger, config.epsilon, config.eta, config.beta_value, d_s, config.lambda0)
        log.info("penalty from the constants ledger: rho=%.6e", rho)
        record, certificate = proximal_al_solve(problem, config.model_copy(update={"rho": rho}), x0)
        return SolveResult(record, certificate, record, rho, "ledger")
    sched = sched or AdaptiveSchedule(eta=config.eta, epsilon=config.epsilon)
    result = adaptive_solve(problem, config, sched, x0, **adaptive_options)
    rho = result.record.rho if result.record is not None else None
    return SolveResult(result.record, result.certificate, result.aggregate, rho, "adaptive", result)
