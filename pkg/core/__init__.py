# Core types and utilities shared by all simulator modules
from .domain import (
    Basis,
    IntensityClass,
    IntensityLabel,
    Polarization,
    PulseBatch,
    PulseRecord,
    TagBatch,
    TimeTag,
    basis_of,
    bit_of,
)
from .rng import RandomBitSource, ReplayBitSource
from .angles import nearest_polarization, wrap_degrees, wrap_symmetric
from .report_output import ReportOutput
from .base_stage import BaseStage

__all__ = [
    "Basis",
    "IntensityClass",
    "IntensityLabel",
    "Polarization",
    "PulseBatch",
    "PulseRecord",
    "TagBatch",
    "TimeTag",
    "basis_of",
    "bit_of",
    "RandomBitSource",
    "ReplayBitSource",
    "nearest_polarization",
    "wrap_degrees",
    "wrap_symmetric",
    "ReportOutput",
    "BaseStage",
]
