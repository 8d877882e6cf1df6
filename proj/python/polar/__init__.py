"""Pessimistic model-based DTR learning (C++ core)."""

# The compiled module may live in a build tree next to this source package.
__path__ = __import__("pkgutil").extend_path(__path__, __name__)

import json as _json

from ._core import (  # noqa: E402
    CSV_HEADER,
    ConfigError,
    DataError,
    NumericalError,
    basis,
    default_config,
    format_row,
    gp,
    normalize_config,
    preset_config,
    simenv,
)
from ._core import run_cell as _run_cell  # noqa: E402
from ._core import run_experiment as _run_experiment  # noqa: E402


def config(preset=None, full=False, **overrides):
    """Config dict from a preset (or the defaults) with top-level overrides."""
    cfg = _json.loads(preset_config(preset, full) if preset else default_config())
    cfg.update(overrides)
    return _json.loads(normalize_config(_json.dumps(cfg)))


def _text(cfg):
    return cfg if isinstance(cfg, str) else _json.dumps(cfg)


def run_experiment(cfg, resume=False):
    return _run_experiment(_text(cfg), resume)


def run_cell(cfg, n, p, replication=0):
    return _run_cell(_text(cfg), n, p, replication)


__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "DataError",
    "NumericalError",
    "basis",
    "config",
    "format_row",
    "gp",
    "preset_config",
    "run_cell",
    "run_experiment",
    "simenv",
]
