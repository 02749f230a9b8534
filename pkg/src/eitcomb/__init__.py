"""Transient EIT under strong phase modulation: simulation and analysis."""

__version__ = "0.1.0"

from .model import (
    AmbiguityError,
    FrequencyGrid,
    MagneticSpec,
    MediumSpec,
    ModulationSpec,
    NumericsError,
    ProbeShape,
    ProbeSpec,
    Scenario,
    TimeGrid,
    ValidationError,
    Waveform,
    beta,
    chirp_rate,
    eit_linewidth,
    instantaneous_frequency,
    validate,
)
