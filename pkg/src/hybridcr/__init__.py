"""Hybrid underlay/cooperative spectrum sharing simulator over a finite-state Markov channel."""

from ._jit import NUMBA_ENABLED
from .belief import (
    Action,
    OutageModel,
    RewardTable,
    build_reward_table,
    expected_reward,
    init_belief,
    select_action,
    update_blind,
    update_on_observation,
)
from .channel import (
    ChannelModel,
    ChannelParams,
    InvalidParamsError,
    ModelInvalidError,
    build_thresholds,
    level_crossing_rate,
    sample_next_level,
    sample_snr_in_level,
    stationary_distribution,
    transition_matrix,
)
from .experiment import ExperimentConfig, emit_csv, parse_config, sweep
from .sim import LinkBudget, Metrics, Mode, RunConfig, SimState, audit_conservation, run, step

__version__ = "0.1.0"
