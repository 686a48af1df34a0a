"""
Formatting module for proxal.

Human-readable summaries of runs, certificates and scaling reports, printed
to standard error by the CLI.
"""

import math


def _number(value, spec=".3e"):
    if value is None:
        return "n/a"
    if isinstance(value, float) and math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return format(value, spec)


def format_run_summary(record, certificate=None):
    """Multi-line summary of a finished run."""
    totals = record.totals()
    text = f"status: {record.status}\n"
    text += f"stop index: {record.stop_index if record.stop_index is not None else 'n/a'}\n"
    text += f"rho: {_number(record.rho)}  beta: {_number(record.beta)}  seed: {record.seed}\n"
    text += (
        f"outer iterations: {totals['outer_iterations']:,}  "
        f"inner iterations: {totals['inner_iterations']:,}  "
        f"hvps: {totals['hvps']:,}\n"
    )
    if record.trials:
        text += f"adaptive trials: {len(record.trials)} (final rho {_number(record.trials[-1]['rho'])})\n"
    if certificate is not None:
        text += format_certificate(certificate)
    return text


def format_certificate(certificate):
    verdict_1o = "yes" if certificate.is_1o() else "no"
    verdict_2o = "yes" if certificate.is_2o() else "no"
    text = f"|grad L0| = {_number(certificate.stat_norm)}  |c| = {_number(certificate.feas_norm)}"
    text += f"  (eps = {_number(certificate.epsilon)})\n"
    if certificate.reduced_min_eig is not None:
        text += f"reduced Hessian min eig = {_number(certificate.reduced_min_eig)}"
        text += f" on a {certificate.null_space_dim}-dimensional tangent space\n"
    text += f"eps-1o: {verdict_1o}  eps-2o: {verdict_2o}\n"
    return text


def format_scaling_table(report):
    """Markdown table of per-epsilon medians followed by the slope verdict."""
    lines = [
        "| epsilon | median T_eps | median inner | median hvps | converged |",
        "|---|---|---|---|---|",
    ]
    for cell in report["cells"]:
        lines.append(
            f"| {cell['epsilon']:.1e} | {_number(cell['median_T'], 'g')} "
            f"| {_number(cell['median_inner'], 'g')} | {_number(cell['median_hvps'], 'g')} "
            f"| {cell['converged']}/{cell['runs']} |"
        )
    lines.append("")
    lines.append(
        f"outer slope {_number(report['slope'], '.3f')} vs predicted {report['expected_slope']:.3f}"
        f" (+{report['slope_tolerance']:.2f}): {'PASS' if report['passed'] else 'FAIL'}"
    )
    diagnostics = report.get("diagnostics", {})
    if diagnostics:
        lines.append(
            f"inner slope {_number(diagnostics.get('inner_slope'), '.3f')}"
            f" (bound {diagnostics['predicted']['inner']:.3f}),"
            f" hvp slope {_number(diagnostics.get('hvp_slope'), '.3f')}"
            f" (bound {diagnostics['predicted']['hvps']:.3f})"
        )
    for failure in report.get("failures", []):
        lines.append(f"failed: {failure}")
    return "\n".join(lines) + "\n"
