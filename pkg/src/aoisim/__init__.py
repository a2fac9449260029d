"""Power-minimal V2V networking with probabilistic age-of-information tail
control: channel/queue simulation, drift-plus-penalty power control,
extreme-value tail modeling, and spectral-clustering RB allocation."""

from .config import DerivedParams, SimConfig, config_from_dict, derive_params, load_config
from .simulator import MetricsReport, ccdf, run, sweep

__all__ = [
    "DerivedParams",
    "MetricsReport",
    "SimConfig",
    "ccdf",
    "config_from_dict",
    "derive_params",
    "load_config",
    "run",
    "sweep",
]

__version__ = "0.1.0"
