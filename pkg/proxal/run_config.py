"""
Run configuration module for proxal.

Strict schemas for the JSON files the harness reads: run configs, scaling
study specs and point files. Unknown keys are rejected everywhere.
"""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .adaptive_rho import AdaptiveSchedule
from .config import (
    DEFAULT_C0,
    DEFAULT_ETA2_CAP,
    DEFAULT_MAX_OUTER,
    DEFAULT_Q,
    DEFAULT_SLOPE_TOLERANCE,
    DEFAULT_T0,
    DEFAULT_TRIAL_CAP,
    OUTPUT_DIR,
    RUN_CSV,
    RUN_JSON,
)
from .proximal_al import InnerSettings, SolverConfig
from .problems import build_problem

MODES = {"1o": "first_order", "2o": "second_order"}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemSpec(StrictModel):
    name: str = "sphere_linear"
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self):
        return build_problem(self.name, self.params)


class BudgetSpec(StrictModel):
    max_outer: int = Field(DEFAULT_MAX_OUTER, ge=1)


class AdaptiveSpec(StrictModel):
    q: float = Field(DEFAULT_Q, gt=1)
    T0: int = Field(DEFAULT_T0, ge=1)
    C0: float = Field(DEFAULT_C0, gt=0)
    trial_cap: int = Field(DEFAULT_TRIAL_CAP, ge=1)
    inner_cap0: Optional[float] = Field(None, gt=0)


class OutputSpec(StrictModel):
    """Output directory and file names; the JSON file name is read from the `json` key."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    dir: str = OUTPUT_DIR
    csv: str = RUN_CSV
    json_name: str = Field(RUN_JSON, alias="json")


def _check_eta(value):
    if not (0 <= value <= 2):
        raise ValueError("eta must lie in the valid range [0,2]")
    return value


def _check_epsilon(value):
    if not (0 < value <= 1):
        raise ValueError("epsilon must lie in the valid range (0,1]")
    return value


def _parse_rho(value):
    """Accept "adaptive", a positive number or the string "fixed: <value>"."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text == "adaptive":
            return "adaptive"
        if text.startswith("fixed:"):
            value = float(text.split(":", 1)[1])
        else:
            raise ValueError("rho must be 'adaptive', a positive number or 'fixed: <value>'")
    if not value > 0:
        raise ValueError("rho must be positive")
    return float(value)


class RunConfigFile(StrictModel):
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    mode: Literal["1o", "2o"] = "1o"
    epsilon: float = 1e-4
    eta: float = 2.0
    rho: Union[float, str] = "adaptive"
    beta: Union[float, Literal["default"]] = "default"
    seed: int = Field(0, ge=0, le=2**64 - 1)
    x0: Optional[List[float]] = None
    lambda0: Optional[List[float]] = None
    budgets: BudgetSpec = Field(default_factory=BudgetSpec)
    inner: InnerSettings = Field(default_factory=InnerSettings)
    adaptive: AdaptiveSpec = Field(default_factory=AdaptiveSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    audit: bool = False

    @field_validator("eta")
    @classmethod
    def eta_in_range(cls, value):
        return _check_eta(value)

    @field_validator("epsilon")
    @classmethod
    def epsilon_in_range(cls, value):
        return _check_epsilon(value)

    @field_validator("rho")
    @classmethod
    def rho_policy(cls, value):
        return _parse_rho(value)

    @field_validator("beta")
    @classmethod
    def beta_positive(cls, value):
        if value != "default" and not value > 0:
            raise ValueError("beta must be positive or 'default'")
        return value

    @model_validator(mode="after")
    def second_order_eta(self):
        if self.mode == "2o" and self.eta < 1:
            raise ValueError("eta must lie in the valid range [1,2] in 2o mode")
        return self

    def solver_config(self):
        return SolverConfig(
            epsilon=self.epsilon,
            eta=self.eta,
            beta=None if self.beta == "default" else self.beta,
            rho=None if self.rho == "adaptive" else self.rho,
            mode=MODES[self.mode],
            inner=self.inner,
            max_outer=self.budgets.max_outer,
            seed=self.seed,
            lambda0=self.lambda0,
            audit=self.audit,
        )

    def schedule(self):
        return AdaptiveSchedule(
            q=self.adaptive.q,
            T0=self.adaptive.T0,
            eta=self.eta,
            epsilon=self.epsilon,
            lambda0=None if self.lambda0 is None else tuple(self.lambda0),
        )


class ScalingStudySpec(StrictModel):
    eps_grid: List[float]
    eta: float = 2.0
    repetitions: int = Field(1, ge=1)
    seed_base: int = Field(0, ge=0, le=2**64 - 1)
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    x0: Optional[List[float]] = None
    mode: Literal["1o", "2o"] = "1o"
    rho: Optional[float] = Field(None, gt=0)
    slope_tolerance: float = Field(DEFAULT_SLOPE_TOLERANCE, ge=0)
    eta2_cap: int = Field(DEFAULT_ETA2_CAP, ge=1)
    inner: InnerSettings = Field(default_factory=InnerSettings)
    budgets: BudgetSpec = Field(default_factory=BudgetSpec)
    adaptive: AdaptiveSpec = Field(default_factory=AdaptiveSpec)
    workers: int = Field(1, ge=1)

    @field_validator("eta")
    @classmethod
    def eta_in_range(cls, value):
        return _check_eta(value)

    @field_validator("eps_grid")
    @classmethod
    def grid_strictly_decreasing(cls, grid):
        if len(grid) < 3:
            raise ValueError("eps_grid needs at least 3 values")
        for value in grid:
            _check_epsilon(value)
        if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
            raise ValueError("eps_grid must be strictly decreasing")
        return grid

    @model_validator(mode="after")
    def second_order_eta(self):
        if self.mode == "2o" and self.eta < 1:
            raise ValueError("eta must lie in the valid range [1,2] in 2o mode")
        return self

    @property
    def expected_slope(self):
        return 2.0 - self.eta

    def solver_config(self, epsilon, seed, rho=None):
        return SolverConfig(
            epsilon=epsilon,
            eta=self.eta,
            rho=rho,
            mode=MODES[self.mode],
            inner=self.inner,
            max_outer=self.budgets.max_outer,
            seed=seed,
        )

    def schedule(self, epsilon):
        return AdaptiveSchedule(q=self.adaptive.q, T0=self.adaptive.T0, eta=self.eta, epsilon=epsilon)


class PointFile(StrictModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    x: List[float]
    lam: Optional[List[float]] = Field(None, alias="lambda")
    epsilon: float = Field(gt=0)
    problem: Optional[ProblemSpec] = None
