"""
JSON parsing module for proxal.

Loads the harness's JSON inputs and turns parse or schema failures into
ConfigError with a readable message.
"""

import json
from pathlib import Path

from pydantic import ValidationError

from .errors import ConfigError
from .run_config import PointFile, RunConfigFile, ScalingStudySpec


def load_json_file(path):
    """Read a JSON object from `path`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    return data


def describe_validation_error(exc):
    """One line per failed field, e.g. "eta: eta must lie in the valid range [0,2]"."""
    lines = []
    for error in exc.errors():
        where = ".".join(str(part) for part in error["loc"]) or "<root>"
        message = error["msg"].removeprefix("Value error, ")
        lines.append(f"{where}: {message}")
    return "; ".join(lines)


def _validate(model, data, source):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid {source}: {describe_validation_error(exc)}") from exc


def parse_run_config(path=None, data=None):
    """RunConfigFile from a path (or an already-loaded dict)."""
    if data is None:
        data = load_json_file(path) if path is not None else {}
    return _validate(RunConfigFile, data, "run config")


def parse_scaling_spec(path=None, data=None):
    if data is None:
        data = load_json_file(path)
    return _validate(ScalingStudySpec, data, "scaling study spec")


def parse_point_file(path):
    """Point file with arrays "x", optional "lambda", scalar "epsilon" and an optional problem."""
    return _validate(PointFile, load_json_file(path), "point file")
