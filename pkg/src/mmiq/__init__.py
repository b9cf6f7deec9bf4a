"""Transient moments, diffusion limits and simulation of Markov-modulated infinite-server queues.

Two service disciplines are covered. In Model I every job present is served
at the rate of the current background state. In Model II a job keeps the
service rate of the background state it arrived in.
"""

from .chain_core import (
    ChainAnalysis,
    Generator,
    QueueSpec,
    analyze_chain,
    deviation_matrix,
    fundamental_matrix,
    spectral_gap,
    stationary_distribution,
    transition_matrix,
    weighted_deviation_matrix,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientReplications,
    InvalidGenerator,
    MmiqError,
    NotPSD,
    NumericalError,
    OdeToleranceFailure,
    QuadratureFailure,
    SimulationOverflow,
    SingularSystem,
    StatisticalError,
)
from .model1 import ScalingParams

__version__ = "0.1.0"

__all__ = [
    "ChainAnalysis", "Generator", "QueueSpec", "ScalingParams", "analyze_chain",
    "deviation_matrix", "fundamental_matrix", "spectral_gap", "stationary_distribution",
    "transition_matrix", "weighted_deviation_matrix",
    "ConfigError", "DimensionMismatch", "InsufficientReplications", "InvalidGenerator",
    "MmiqError", "NotPSD", "NumericalError", "OdeToleranceFailure", "QuadratureFailure",
    "SimulationOverflow", "SingularSystem", "StatisticalError",
]
