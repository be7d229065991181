"""Cooperative multihop relaying in Poisson networks.

Monte Carlo simulation, closed-form approximation and (R, p) optimization
of the progress rate density for no-cooperation, incremental-redundancy
and repetition combining protocols.
"""

from .analytic import (
    AnalyticParams,
    AnalyticResult,
    CellAreaEstimate,
    CellAreaSettings,
    ccdf_s,
    cell_area_numeric,
    d1_tilde,
    dm_tilde,
    gaussian_pair_integral,
    prd_tilde,
    spatial_factor,
    w1_area,
    w2_lower_bound,
)
from .channel import INFINITE, mutual_info, path_gain, sir_at, sir_field
from .config import SimConfig, parse_config
from .errors import (
    AccuracyError,
    ConfigError,
    CoopRelayError,
    FlatObjectiveError,
    ParameterError,
)
from .geometry import (
    NodeSet,
    RoleAssignment,
    Window,
    add_conditioned_node,
    assign_roles,
    default_window,
    sample_ppp,
)
from .optimizer import OptimizationResult, maximize_analytic, maximize_mc, sweep
from .protocol import (
    CombiningMode,
    HopOutcome,
    PrdEstimate,
    RelayAccumulator,
    contention_winner,
    decode_success,
    estimate_prd,
    select_forwarding_relay,
    simulate_chain,
    simulate_trial,
)
from .seeds import TrialStreams, substream

__version__ = "0.1.0"

__all__ = [
    "AnalyticParams",
    "AnalyticResult",
    "AccuracyError",
    "CellAreaEstimate",
    "CellAreaSettings",
    "CombiningMode",
    "ConfigError",
    "CoopRelayError",
    "FlatObjectiveError",
    "HopOutcome",
    "INFINITE",
    "NodeSet",
    "OptimizationResult",
    "ParameterError",
    "PrdEstimate",
    "RelayAccumulator",
    "SimConfig",
    "TrialStreams",
    "Window",
    "add_conditioned_node",
    "assign_roles",
    "ccdf_s",
    "cell_area_numeric",
    "contention_winner",
    "d1_tilde",
    "decode_success",
    "default_window",
    "dm_tilde",
    "estimate_prd",
    "gaussian_pair_integral",
    "maximize_analytic",
    "maximize_mc",
    "mutual_info",
    "parse_config",
    "path_gain",
    "prd_tilde",
    "sample_ppp",
    "select_forwarding_relay",
    "simulate_chain",
    "simulate_trial",
    "sir_at",
    "sir_field",
    "spatial_factor",
    "substream",
    "sweep",
    "w1_area",
    "w2_lower_bound",
]
