"""Regime discovery, survival modeling and forecasting for co-evolving series."""

from .errors import AtlasError, ConfigError, DataError, StageFailure
from .panel import SeriesPanel, load_csv
from .pipeline import PipelineConfig, PipelineResult, run_pipeline
from .synthetic import SynthConfig, delete_values, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AtlasError",
    "ConfigError",
    "DataError",
    "PipelineConfig",
    "PipelineResult",
    "SeriesPanel",
    "StageFailure",
    "SynthConfig",
    "delete_values",
    "generate_synthetic",
    "load_csv",
    "run_pipeline",
    "__version__",
]
