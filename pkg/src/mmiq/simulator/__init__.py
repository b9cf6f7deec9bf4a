"""Monte Carlo simulation of the scaled modulated queue."""

from .core import (
    ENGINES,
    SimBatch,
    SimConfig,
    aggregation_valid,
    choose_engine,
    simulate,
    simulate_model1,
    simulate_model2,
)
from .diagnostics import (
    FcltReport,
    FcltRow,
    SweepTable,
    default_t_star,
    exact_variance,
    fclt_diagnostics,
    variance_scaling_sweep,
)

__all__ = [
    "ENGINES", "SimBatch", "SimConfig", "aggregation_valid", "choose_engine", "simulate",
    "simulate_model1", "simulate_model2", "FcltReport", "FcltRow", "SweepTable",
    "default_t_star", "exact_variance", "fclt_diagnostics", "variance_scaling_sweep",
]
