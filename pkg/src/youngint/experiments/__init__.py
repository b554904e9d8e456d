"""Experiment harness and command-line interface."""

from __future__ import annotations

from .config import ExperimentConfig, load_config, make_field
from .harness import (
    MomentEstimate,
    mc_exp_moments,
    mc_sup_moments,
    run_bound_sweep,
    run_crossval,
)
