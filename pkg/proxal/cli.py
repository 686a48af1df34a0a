"""
Command-line module for proxal.

Subcommands: solve, check, phase1, scaling-study, audit. Diagnostics go to
standard error through logging; machine output (JSON) goes to standard
output and to files under the output directory.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .adaptive_rho import phase1_feasibility, schedule, solve
from .certify import ESTIMATE, check_1o, check_2o
from .config import (
    DENSE_THRESHOLD,
    EXIT_CONFIG_ERROR,
    EXIT_EVALUATION_FAILURE,
    EXIT_INFEASIBLE,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    IDENTITY_AUDIT_TOL,
    KKT_AUDIT_TOL,
    LOG_LEVEL,
)
from .errors import (
    ConfigError,
    MissingConstantError,
    PreconditionError,
    ProblemDefinitionError,
    ProxalError,
)
from .formatters import format_certificate, format_run_summary, format_scaling_table
from .json_parser import describe_validation_error, load_json_file, parse_point_file, parse_run_config, parse_scaling_spec
from .problems import default_start
from .proximal_al import (
    decrease_audit,
    kkt_residual_audit,
    lyapunov_descent_audit,
    multiplier_identity_audit,
    stop_index_audit,
)
from .run_config import ProblemSpec
from .scaling import scaling_study
from .telemetry import persist_run, run_summary, write_json

log = logging.getLogger(__name__)

CONFIG_ERRORS = (ConfigError, ProblemDefinitionError, PreconditionError, MissingConstantError)


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="JSON run config")
    parser.add_argument("--out", type=Path, help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="64-bit run seed")
    parser.add_argument("--mode", choices=["1o", "2o"], help="first- or second-order mode")
    parser.add_argument("--rho", help="'adaptive' or a fixed positive penalty")


def build_parser():
    parser = argparse.ArgumentParser(prog="proxal", description="Proximal augmented Lagrangian harness")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    solve_parser = sub.add_parser("solve", help="solve a configured problem and write run.csv/run.json")
    _add_common(solve_parser)
    solve_parser.add_argument("--audit", action="store_true", help="store iterates for the audits")

    check_parser = sub.add_parser("check", help="certify a point file")
    check_parser.add_argument("--point", type=Path, required=True, help="JSON with x, optional lambda, epsilon")
    check_parser.add_argument("--config", type=Path, help="run config supplying the problem")
    check_parser.add_argument("--mode", choices=["1o", "2o"], default="2o")

    phase1_parser = sub.add_parser("phase1", help="run the Phase-I feasibility solve")
    _add_common(phase1_parser)

    scaling_parser = sub.add_parser("scaling-study", help="measure T_eps over an epsilon grid")
    scaling_parser.add_argument("--config", type=Path, required=True, help="JSON scaling study spec")
    scaling_parser.add_argument("--out", type=Path, help="directory for scaling.json")
    scaling_parser.add_argument("--seed", type=int, help="seed base")

    audit_parser = sub.add_parser("audit", help="solve in audit mode and check the run identities")
    _add_common(audit_parser)
    return parser


def _configure_logging(verbose):
    level = LOG_LEVEL
    if verbose == 1:
        level = "INFO"
    elif verbose >= 2:
        level = "DEBUG"
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_run_config(args, audit=False):
    data = load_json_file(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    if args.mode is not None:
        data["mode"] = args.mode
    if args.rho is not None:
        data["rho"] = args.rho if args.rho == "adaptive" else _float_flag(args.rho, "--rho")
    if audit or getattr(args, "audit", False):
        data["audit"] = True
    if args.out is not None:
        data.setdefault("output", {})["dir"] = str(args.out)
    return parse_run_config(data=data)


def _float_flag(text, flag):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{flag} expects 'adaptive' or a number, got {text!r}") from exc


def _start_point(run_config, problem):
    if run_config.x0 is None:
        return default_start(problem)
    x0 = np.array(run_config.x0, dtype=float)
    if x0.shape != (problem.n,):
        raise ConfigError(f"x0 has {x0.size} entries but the problem has n={problem.n}")
    return x0


def _solve(run_config):
    problem = run_config.problem.build()
    result = solve(
        problem,
        run_config.solver_config(),
        _start_point(run_config, problem),
        sched=run_config.schedule(),
        trial_cap=run_config.adaptive.trial_cap,
        c0=run_config.adaptive.C0,
        inner_cap0=run_config.adaptive.inner_cap0,
    )
    return problem, result


def _status_exit(status):
    if status in ("converged_1o", "converged_2o"):
        return EXIT_OK
    if status == "phase1_infeasible":
        return EXIT_INFEASIBLE
    return EXIT_NOT_CONVERGED


def cmd_solve(args):
    run_config = _load_run_config(args)
    _, result = _solve(run_config)
    output = run_config.output
    persist_run(result.aggregate, output.dir, output.csv, output.json_name, certificate=result.certificate)
    sys.stderr.write(format_run_summary(result.aggregate, result.certificate))
    print(json.dumps(run_summary(result.aggregate, result.certificate), indent=2, sort_keys=True))
    return _status_exit(result.status)


def cmd_check(args):
    point = parse_point_file(args.point)
    if point.problem is not None:
        spec = point.problem
    elif args.config is not None:
        spec = parse_run_config(args.config).problem
    else:
        spec = ProblemSpec()
    problem = spec.build()
    x = np.array(point.x, dtype=float)
    if x.shape != (problem.n,):
        raise ConfigError(f"point has {x.size} entries but the problem has n={problem.n}")
    lam = ESTIMATE if point.lam is None else np.array(point.lam, dtype=float)
    if args.mode == "2o" and problem.n <= DENSE_THRESHOLD:
        certificate = check_2o(problem, x, lam, point.epsilon)
        passed = certificate.is_2o()
    else:
        if args.mode == "2o":
            log.warning("n=%d exceeds the dense threshold %d; checking first order only", problem.n, DENSE_THRESHOLD)
        certificate = check_1o(problem, x, lam, point.epsilon)
        passed = certificate.is_1o()
    sys.stderr.write(format_certificate(certificate))
    print(json.dumps(certificate.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if passed else EXIT_NOT_CONVERGED


def cmd_phase1(args):
    run_config = _load_run_config(args)
    problem = run_config.problem.build()
    if run_config.rho == "adaptive":
        rho, _ = schedule(1, run_config.schedule())
    else:
        rho = run_config.rho
    result = phase1_feasibility(
        problem,
        _start_point(run_config, problem),
        rho,
        run_config.epsilon,
        c0=run_config.adaptive.C0,
        inner=run_config.inner,
        seed=run_config.seed,
    )
    payload = {
        "x": [float(v) for v in result.x],
        "feasible": result.feasible,
        "status": result.status,
        "c_norm": result.c_norm,
        "threshold": result.threshold,
        "rho": rho,
        "inner_iterations": result.inner.iterations,
        "inner_status": result.inner.status,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if result.feasible:
        return EXIT_OK
    return EXIT_INFEASIBLE if result.infeasible_critical else EXIT_NOT_CONVERGED


def cmd_scaling(args):
    data = load_json_file(args.config)
    if args.seed is not None:
        data["seed_base"] = args.seed
    spec = parse_scaling_spec(data=data)
    report = scaling_study(spec)
    sys.stderr.write(format_scaling_table(report))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(report, args.out / "scaling.json")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_NOT_CONVERGED


def cmd_audit(args):
    run_config = _load_run_config(args, audit=True)
    problem, result = _solve(run_config)
    record = result.record
    if record is None:
        log.warning("no outer run to audit (status %s)", result.status)
        return _status_exit(result.status)
    violations = lyapunov_descent_audit(record)
    kkt = kkt_residual_audit(record, problem)
    identity = multiplier_identity_audit(record, problem)
    decrease = decrease_audit(record)
    stop_ok = stop_index_audit(record)
    payload = {
        "status": record.status,
        "lyapunov_violations": [vars(violation) for violation in violations],
        "kkt_discrepancy": kkt,
        "multiplier_identity_error": identity,
        "decrease_violations": decrease,
        "stop_index_consistent": stop_ok,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    clean = (
        not violations
        and kkt <= KKT_AUDIT_TOL
        and identity <= IDENTITY_AUDIT_TOL
        and not decrease
        and stop_ok
    )
    return EXIT_OK if clean else EXIT_NOT_CONVERGED


COMMANDS = {
    "solve": cmd_solve,
    "check": cmd_check,
    "phase1": cmd_phase1,
    "scaling-study": cmd_scaling,
    "audit": cmd_audit,
}


def main(argv=None):
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        log.error("invalid configuration: %s", describe_validation_error(exc))
        return EXIT_CONFIG_ERROR
    except CONFIG_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_CONFIG_ERROR
    except (ProxalError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_EVALUATION_FAILURE
