"""Download delay of MDS-coded D2D caching in a cellular cluster: model and simulator."""

from .composition import RequestSnapshot, instantaneous_snapshot, request_snapshot
from .d2d import D2DOutcomeDistribution, outcome_distribution
from .delay import DelayBreakdown, evaluate
from .kernels import DeathProcessKernel, TruncationPolicy, poisson_pmf, truncation_index
from .params import CodeParams, ConfigError, StorageBudget, SystemParams, cached_file_count, validate
from .popularity import PopularityModel
from .sim import SimConfig, SimStats, compare, run

__version__ = "0.1.0"

__all__ = [
    "CodeParams", "ConfigError", "D2DOutcomeDistribution", "DeathProcessKernel", "DelayBreakdown",
    "PopularityModel", "RequestSnapshot", "SimConfig", "SimStats", "StorageBudget", "SystemParams",
    "TruncationPolicy", "cached_file_count", "compare", "evaluate", "instantaneous_snapshot",
    "outcome_distribution", "poisson_pmf", "request_snapshot", "run", "truncation_index", "validate",
]
