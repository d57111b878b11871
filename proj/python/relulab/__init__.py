"""ReLU training-dynamics audits: networks, Adam, traces, bounds, arrangements, barriers, coverage."""

import json

from . import _core
from ._core import (
    ConfigError,
    DomainError,
    Error,
    InsufficientDataError,
    NumericError,
    RefusalError,
    ShapeError,
    activation_pattern,
    adam_run,
    box_counting_dimension,
    count_regions,
    covering_number,
    dudley_gap,
    effective_dimension,
    forward,
    hidden_count,
    init_params,
    loss_and_grad,
    margin,
    param_count,
    schedule_alpha,
    sparse_tope_diameter,
    subgaussian_sigma,
    zaslavsky,
)


def evaluate_bounds(inputs, horizon=0):
    """Bound rows for a dict of inputs, as a list of dicts."""
    return json.loads(_core.evaluate_bounds_json(json.dumps(inputs), horizon))


def run_experiment(config_path, report_dir="", steps=0):
    """Train and audit; returns (run_dir, report dict)."""
    run_dir, report = _core.run_experiment(str(config_path), str(report_dir), steps)
    return run_dir, json.loads(report)


def audit_run_dir(run_dir):
    return json.loads(_core.audit_run_dir(str(run_dir)))
