"""Scaling-law toolkit for splitting a training budget between full precision and QAT."""

__version__ = "0.1.0"

from .errors import (
    DegenerateLawError,
    DomainError,
    FitError,
    InfeasibleError,
    NumericalError,
    QatScaleError,
    RecordParseError,
    ValidationError,
)
from .law import PUBLISHED_PARAMS, FractionLawParams, LossLawParams, eval_fraction_law, eval_loss
from .records import ExperimentRecord, load_records, read_records

__all__ = [
    "DegenerateLawError",
    "DomainError",
    "ExperimentRecord",
    "FitError",
    "FractionLawParams",
    "InfeasibleError",
    "LossLawParams",
    "NumericalError",
    "PUBLISHED_PARAMS",
    "QatScaleError",
    "RecordParseError",
    "ValidationError",
    "__version__",
    "eval_fraction_law",
    "eval_loss",
    "load_records",
    "read_records",
]
