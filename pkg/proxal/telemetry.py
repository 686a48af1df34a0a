"""
Telemetry module for proxal.

Persists a RunRecord as a per-iteration CSV plus a JSON summary carrying the
three complexity measures (outer iterations, total inner iterations, total
Hessian-vector products).
"""

import csv
import json
import logging
from pathlib import Path

from .config import CSV_HEADER, RUN_CSV, RUN_JSON

log = logging.getLogger(__name__)


def _cell(value):
    # repr keeps every bit so identical runs give identical bytes
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _vector(values):
    return None if values is None else [float(v) for v in values]


def run_summary(record, certificate=None):
    """JSON-ready summary of a record."""
    summary = {
        "status": record.status,
        "stop_index": record.stop_index,
        "totals": record.totals(),
        "config": record.config,
        "seed": record.seed,
        "rho": record.rho,
        "beta": record.beta,
        "mode": record.mode,
        "x_final": _vector(record.x_final),
        "lambda_final": _vector(record.lam_final),
        "wall_time": record.wall_time,
    }
    if record.trials:
        summary["trials"] = record.trials
    if certificate is not None:
        summary["certificate"] = certificate.to_dict()
    return summary


def write_csv(record, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in record.rows:
            writer.writerow([_cell(value) for value in row.csv_row()])
    return path


def write_json(summary, path):
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def persist_run(record, out_dir, csv_name=RUN_CSV, json_name=RUN_JSON, certificate=None):
    """Write run.csv and run.json under `out_dir`; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = write_csv(record, out_dir / csv_name)
    json_path = write_json(run_summary(record, certificate), out_dir / json_name)
    log.info("wrote %s and %s", csv_path, json_path)
    return csv_path, json_path


def load_run_summary(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def load_run_rows(path):
    """CSV rows as dicts of floats (k and the counters as ints)."""
    integer_columns = {"k", "inner_iters", "hvp_count"}
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return [
            {key: int(value) if key in integer_columns else float(value) for key, value in row.items()}
            for row in csv.DictReader(handle)
        ]
