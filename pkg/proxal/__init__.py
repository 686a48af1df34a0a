"""
proxal: proximal augmented Lagrangian solver for smooth nonconvex problems
with nonlinear equality constraints, with a matrix-free Newton-CG inner
solver, adaptive penalty selection, optimality certification and a
complexity-scaling harness.
"""

from .adaptive_rho import AdaptiveSchedule, adaptive_solve, phase1_feasibility, solve
from .certify import Certificate, check_1o, check_2o, estimate_multiplier
from .problems import (
    ConstantsLedger,
    ProblemInstance,
    build_problem,
    make_linear_qp,
    make_rosenbrock_sphere,
    make_sphere_linear,
    register_problem,
)
from .proximal_al import SolverConfig, classic_al_solve, proximal_al_solve

__all__ = [
    "AdaptiveSchedule",
    "Certificate",
    "ConstantsLedger",
    "ProblemInstance",
    "SolverConfig",
    "adaptive_solve",
    "build_problem",
    "check_1o",
    "check_2o",
    "classic_al_solve",
    "estimate_multiplier",
    "make_linear_qp",
    "make_rosenbrock_sphere",
    "make_sphere_linear",
    "phase1_feasibility",
    "proximal_al_solve",
    "register_problem",
    "solve",
]
