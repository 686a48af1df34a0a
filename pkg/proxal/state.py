"""
State module for proxal.

Per-iteration telemetry of one outer run and the factory that starts a fresh
record. Row k describes the iterate (x_k, λ_k) produced by outer iteration
k - 1 → k.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

CONVERGED_1O = "converged_1o"
CONVERGED_2O = "converged_2o"
MAX_OUTER_REACHED = "max_outer_reached"
INNER_BUDGET_EXHAUSTED = "inner_budget_exhausted"
CONVERGED = (CONVERGED_1O, CONVERGED_2O)


@dataclass
class OuterState:
    k: int
    stat_norm: float
    feas_norm: float
    dx_norm: float
    dlambda_norm: float
    P: float
    inner_iters: int
    hvp_count: int
    eps_g: float
    eps_H: float
    r_tilde_norm: float
    inner_status: str
    psi_start: float
    psi_end: float
    rho: float
    # only kept in audit mode
    x: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    lam_prev: Optional[np.ndarray] = None

    @property
    def c_norm(self):
        return self.feas_norm

    def csv_row(self):
        return [
            self.k,
            self.stat_norm,
            self.feas_norm,
            self.dx_norm,
            self.dlambda_norm,
            self.P,
            self.inner_iters,
            self.hvp_count,
            self.eps_g,
            self.eps_H,
            self.r_tilde_norm,
        ]


@dataclass
class RunRecord:
    rows: List[OuterState] = field(default_factory=list)
    stop_index: Optional[int] = None
    status: Optional[str] = None
    wall_time: float = 0.0
    x0: Optional[np.ndarray] = None
    lambda0: Optional[np.ndarray] = None
    x_final: Optional[np.ndarray] = None
    lam_final: Optional[np.ndarray] = None
    rho: Optional[float] = None
    beta: float = 0.0
    seed: int = 0
    mode: str = "first_order"
    audit: bool = False
    config: dict = field(default_factory=dict)
    # filled by the adaptive framework
    trials: List[dict] = field(default_factory=list)

    @property
    def outer_iterations(self):
        return len(self.rows)

    @property
    def inner_iterations(self):
        return sum(row.inner_iters for row in self.rows)

    @property
    def hvp_total(self):
        return sum(row.hvp_count for row in self.rows)

    @property
    def converged(self):
        return self.status in CONVERGED

    def totals(self):
        return {
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "hvps": self.hvp_total,
        }


def create_run_record(x0, lambda0, rho, beta, seed, mode, audit, config=None):
    """Create a fresh record for one outer run."""
    return RunRecord(
        x0=np.array(x0, dtype=float),
        lambda0=np.array(lambda0, dtype=float),
        x_final=np.array(x0, dtype=float),
        lam_final=np.array(lambda0, dtype=float),
        rho=rho,
        beta=beta,
        seed=seed,
        mode=mode,
        audit=audit,
        config=dict(config or {}),
    )


def merge_records(records, status, stop_index=None):
    """Concatenate trial records into one aggregate record; k restarts at 1 in each trial."""
    merged = RunRecord(status=status, stop_index=stop_index)
    if not records:
        return merged
    last = records[-1]
    merged.x0 = records[0].x0
    merged.lambda0 = records[0].lambda0
    merged.x_final = last.x_final
    merged.lam_final = last.lam_final
    merged.rho = last.rho
    merged.beta = last.beta
    merged.seed = records[0].seed
    merged.mode = last.mode
    merged.audit = last.audit
    merged.config = dict(last.config)
    merged.wall_time = sum(record.wall_time for record in records)
    for record in records:
        merged.rows.extend(record.rows)
    return merged
