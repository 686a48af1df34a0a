"""
Scaling study module for proxal.

Measures the stopping index T_ε over a decreasing ε grid and fits the
log-log slope of T_ε against 1/ε, to be held against the predicted growth
O(1/ε^{2-η}). Grid cells may run concurrently; results are aggregated by
cell index so the report does not depend on completion order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .adaptive_rho import adaptive_solve
from .problems import default_start
from .proximal_al import proximal_al_solve
from .seeding import derive_seed

log = logging.getLogger(__name__)


def predicted_exponents(eta, mode="first_order", linear_constraints=False):
    """Growth exponents p in O(ε^{-p}) for outer iterations, total inner iterations and HVPs.

    The HVP exponents hold up to logarithmic factors.
    """
    second_order = mode in ("second_order", "2o")
    if linear_constraints:
        inner = (5.0 - eta) if second_order else (3.5 - eta)
        hvps = (5.5 - eta / 2.0) if second_order else (3.75 - eta / 2.0)
    else:
        inner = (2.0 * eta + 5.0) if second_order else (2.0 * eta + 3.5)
        hvps = (2.5 * eta + 5.5) if second_order else (2.5 * eta + 3.75)
    return {"outer": 2.0 - eta, "inner": inner, "hvps": hvps}


def fit_loglog_slope(epsilons, values):
    """Least-squares slope of log(values) against log(1/ε); None with fewer than two usable points."""
    points = [(math.log(1.0 / eps), math.log(value)) for eps, value in zip(epsilons, values) if value and value > 0]
    if len(points) < 2:
        return None
    xs, ys = zip(*points)
    slope, _ = np.polyfit(np.array(xs), np.array(ys), 1)
    return float(slope)


def _is_linear(problem):
    return problem.name == "linear_qp"


def _calibrate_rho(spec, problem, x0):
    """Run the adaptive framework once per grid point and keep the largest accepted ρ."""
    accepted = []
    for index, epsilon in enumerate(spec.eps_grid):
        config = spec.solver_config(epsilon, derive_seed(spec.seed_base, index))
        result = adaptive_solve(
            problem,
            config,
            spec.schedule(epsilon),
            x0,
            trial_cap=spec.adaptive.trial_cap,
            c0=spec.adaptive.C0,
        )
        if result.record is not None and result.record.converged:
            accepted.append(result.record.rho)
        log.info("calibration eps=%.1e: %s after %d trials", epsilon, result.status, result.tau_final)
    if not accepted:
        return None
    return max(accepted)


def _run_cell(spec, problem, x0, rho, index, repetition):
    epsilon = spec.eps_grid[index]
    config = spec.solver_config(epsilon, derive_seed(spec.seed_base, index, repetition), rho=rho)
    record, _ = proximal_al_solve(problem, config, x0)
    return {
        "index": index,
        "repetition": repetition,
        "epsilon": epsilon,
        "status": record.status,
        "T": record.stop_index,
        "inner": record.inner_iterations,
        "hvps": record.hvp_total,
    }


def scaling_study(spec, problem=None):
    """Run every (ε, repetition) cell and report medians, fitted slopes and the verdict."""
    problem = problem or spec.problem.build()
    x0 = np.array(spec.x0, dtype=float) if spec.x0 is not None else default_start(problem)
    rho = spec.rho
    if rho is None:
        rho = _calibrate_rho(spec, problem, x0)
        if rho is None:
            return {
                "cells": [],
                "slope": None,
                "expected_slope": spec.expected_slope,
                "slope_tolerance": spec.slope_tolerance,
                "passed": False,
                "rho": None,
                "failures": ["adaptive calibration did not converge on any grid point"],
            }

    jobs = [(index, repetition) for index in range(len(spec.eps_grid)) for repetition in range(spec.repetitions)]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        futures = [pool.submit(_run_cell, spec, problem, x0, rho, index, rep) for index, rep in jobs]
        runs = [future.result() for future in futures]

    failures = [
        f"eps={run['epsilon']:.1e} repetition={run['repetition']}: {run['status']}"
        for run in runs
        if run["T"] is None
    ]
    cells = []
    for index, epsilon in enumerate(spec.eps_grid):
        group = [run for run in runs if run["index"] == index]
        converged = [run for run in group if run["T"] is not None]
        cells.append(
            {
                "epsilon": epsilon,
                "runs": len(group),
                "converged": len(converged),
                "T": [run["T"] for run in group],
                "median_T": float(np.median([run["T"] for run in converged])) if converged else None,
                "median_inner": float(np.median([run["inner"] for run in group])),
                "median_hvps": float(np.median([run["hvps"] for run in group])),
            }
        )

    slope = fit_loglog_slope(spec.eps_grid, [cell["median_T"] for cell in cells])
    max_T = max((cell["median_T"] for cell in cells if cell["median_T"] is not None), default=None)
    passed = not failures and slope is not None and slope <= spec.expected_slope + spec.slope_tolerance
    if spec.eta == 2 and (max_T is None or max_T > spec.eta2_cap):
        passed = False
        failures.append(f"max T_eps {max_T} exceeds the cap {spec.eta2_cap}")

    mode = "second_order" if spec.mode == "2o" else "first_order"
    report = {
        "cells": cells,
        "slope": slope,
        "expected_slope": spec.expected_slope,
        "slope_tolerance": spec.slope_tolerance,
        "max_T": max_T,
        "rho": rho,
        "passed": passed,
        "failures": failures,
        "diagnostics": {
            "inner_slope": fit_loglog_slope(spec.eps_grid, [cell["median_inner"] for cell in cells]),
            "hvp_slope": fit_loglog_slope(spec.eps_grid, [cell["median_hvps"] for cell in cells]),
            "predicted": predicted_exponents(spec.eta, mode, _is_linear(problem)),
        },
    }
    log.info("scaling study: slope=%s passed=%s", slope, passed)
    return report
