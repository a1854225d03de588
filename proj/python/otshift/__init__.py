"""Label shift via optimal transport on the label simplex."""

import json as _json

from ._otshift import (
    ConfigError,
    DimensionError,
    DomainError,
    Error,
    MassMismatch,
    NumericalFailure,
    PreconditionError,
    exact_ot,
    ls_exact,
    marginal_lower_bound,
    sinkhorn,
    vertex_label_shift,
)
from ._otshift import run_experiment as _run_experiment
from ._otshift import validate_config as _validate_config


def _as_text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def validate_config(config):
    """Validate a config given as a dict or JSON text; returns the experiment name."""
    return _validate_config(_as_text(config))


def run_experiment(config):
    """Run an experiment; returns (artifact paths, summary dict)."""
    paths, summary = _run_experiment(_as_text(config))
    return paths, _json.loads(summary)


__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "Error",
    "MassMismatch",
    "NumericalFailure",
    "PreconditionError",
    "exact_ot",
    "ls_exact",
    "marginal_lower_bound",
    "run_experiment",
    "sinkhorn",
    "validate_config",
    "vertex_label_shift",
]
