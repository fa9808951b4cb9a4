"""Python access to the nvspade core.

Experiment drivers take a config as a dict (or JSON string) using the same keys
as the command line tool's ``--config`` files.
"""

import json

from . import _nvspade
from ._nvspade import (
    ConfigError,
    InvalidArgument,
    NumericalError,
    allocation_quartic,
    bspade_xi,
    generate_random_scene,
    gram_matrix,
    helstrom_binary,
    min_pairwise_separation,
    odmr_intensity,
    optimal_allocation,
    pad_mode_indices,
    pad_probabilities,
    qfim_brightness,
    qfim_two_source,
    rabi_intensity,
    ykl_measurement,
)

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "NumericalError",
    "allocation_quartic",
    "bspade_xi",
    "config",
    "config_hash",
    "generate_random_scene",
    "gram_matrix",
    "helstrom_binary",
    "min_pairwise_separation",
    "odmr_intensity",
    "optimal_allocation",
    "pad_mode_indices",
    "pad_probabilities",
    "qfim_brightness",
    "qfim_two_source",
    "rabi_intensity",
    "run_bayes_demo",
    "run_fisher_sweep",
    "run_monte_carlo",
    "run_protocol",
    "ykl_measurement",
]


def _text(cfg):
    if cfg is None:
        return "{}"
    if isinstance(cfg, str):
        return cfg
    return json.dumps(cfg)


def config(cfg=None):
    """Full config with defaults filled in, as a dict."""
    return json.loads(_nvspade.normalize_config(_text(cfg)))


def config_hash(cfg=None):
    return _nvspade.config_hash(_text(cfg))


def run_protocol(cfg=None):
    return _nvspade.run_protocol(_text(cfg))


def run_monte_carlo(cfg=None):
    return _nvspade.run_monte_carlo(_text(cfg))


def run_fisher_sweep(cfg=None):
    return _nvspade.run_fisher_sweep(_text(cfg))


def run_bayes_demo(cfg=None):
    return _nvspade.run_bayes_demo(_text(cfg))
