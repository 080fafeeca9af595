"""Decoherent histories of open linear systems in ordinary and doubled quantum theory."""

__version__ = "0.1.0"

from .exceptions import (
    BoundaryMassError,
    ConfigError,
    DecohistError,
    IndefiniteFormError,
    NumericalError,
    RecurrenceWarning,
    StabilityError,
    StepSizeError,
    ValidationError,
)
from .models import (
    DecoherenceMatrix,
    FPBath,
    GaussianState,
    HistorySpec,
    ModelParams,
    PathQuadrature,
)

__all__ = [
    "BoundaryMassError",
    "ConfigError",
    "DecoherenceMatrix",
    "DecohistError",
    "FPBath",
    "GaussianState",
    "HistorySpec",
    "IndefiniteFormError",
    "ModelParams",
    "NumericalError",
    "PathQuadrature",
    "RecurrenceWarning",
    "StabilityError",
    "StepSizeError",
    "ValidationError",
    "__version__",
]
