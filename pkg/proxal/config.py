"""
Configuration module for proxal.

Contains all default constants for the solver, the certifier and the harness,
plus the few environment overrides read through python-dotenv.
"""

import os
import sys

from dotenv import load_dotenv

load_dotenv(override=False)

# Derivative checks
FD_STEP = 1e-6
FD_MAX_STEP = 1e-2

# Dense linear algebra in certify (desk scale only)
DENSE_THRESHOLD = int(os.getenv("PROXAL_DENSE_THRESHOLD", "500"))
RANK_TOLERANCE = 1e-10
JACOBIAN_RANK_TOLERANCE = 1e-10

# Newton-CG inner solver
DEFAULT_DELTA = 0.01
DEFAULT_ZETA = 0.5
DEFAULT_INNER_MAX_ITERS = 2000
DEFAULT_INNER_MAX_HVPS = 1_000_000
POWER_ITERATIONS = 10
ARMIJO = 1e-4
MAX_BACKTRACKS = 60
LIPSCHITZ_INIT = 1.0
NC_DECREASE = 1.0 / 24.0
NC_RELAXATION = 10.0
# predicted decreases below this multiple of |F| are lost to rounding
PRECISION_DECREASE = 100.0 * sys.float_info.epsilon

# Outer loop
DEFAULT_MAX_OUTER = 1000
DEFAULT_CLASSIC_RHO = 10.0
DEFAULT_TAU = 0.5
DEFAULT_GAMMA = 10.0
DEFAULT_LAMBDA_BOUND = 1e6

# Audit tolerances
DECREASE_TOL = 1e-12
LYAPUNOV_TOL = 1e-8

# Adaptive penalty framework
DEFAULT_Q = 10.0
DEFAULT_T0 = 20
DEFAULT_C0 = 1.0
DEFAULT_TRIAL_CAP = 60

# Scaling study
DEFAULT_SLOPE_TOLERANCE = 0.3
DEFAULT_ETA2_CAP = 50

# Harness
LOG_LEVEL = os.getenv("PROXAL_LOG_LEVEL", "WARNING").upper()
OUTPUT_DIR = os.getenv("PROXAL_OUT_DIR", "runs")
RUN_CSV = "run.csv"
RUN_JSON = "run.json"
CSV_HEADER = [
    "k",
    "stat_norm",
    "feas_norm",
    "dx_norm",
    "dlambda_norm",
    "P_k",
    "inner_iters",
    "hvp_count",
    "eps_g_k",
    "eps_H_k",
    "r_tilde_norm",
]

# CLI exit codes
EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG_ERROR = 3
EXIT_EVALUATION_FAILURE = 4
EXIT_INFEASIBLE = 5

# Audit thresholds reported by the `audit` subcommand
KKT_AUDIT_TOL = 1e-9
IDENTITY_AUDIT_TOL = 1e-14
