"""Spin-bath stochastic state diffusion simulator (C++ core)."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    DimensionError,
    NumericalError,
    axis_to_rotation,
    bare_rotation,
    bargmann_state,
    coherent_state,
    discretize_ohmic,
    draw_labels,
    hs_distance,
    inverse_stereographic,
    spin_operators,
    stereographic,
    thermal_jz_expectation,
    thermal_partition_function,
)

__version__ = _core.__version__


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def canonical_config(config):
    return _json.loads(_core.canonical_config(_text(config)))


def simulate(config, threads=0):
    return _core.simulate(_text(config), threads)


def oracle_exact(config):
    return _core.oracle_exact(_text(config))


def oracle_dephasing(config):
    return _core.oracle_dephasing(_text(config))


def dispatch(command, config_path, out_dir=None, threads=0, seed=None):
    return _core.dispatch(command, str(config_path), None if out_dir is None else str(out_dir), threads, seed)
