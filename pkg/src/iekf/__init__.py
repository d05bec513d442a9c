"""Left- and right-invariant extended Kalman filters on matrix Lie groups."""

from .cgd import ConcentratedGaussian, Handedness, airm, convert_handedness, equivalence_gap
from .errors import ContractError, CutLocusError, NumericError
from .filters import (
    Discrete,
    FilterState,
    Hybrid,
    MeasurementKind,
    MeasurementModel,
    SystemModel,
    initial_state,
    predict_discrete,
    predict_hybrid,
    reset,
    step,
    update,
)
from .lie import SE23, SE23_R6, SO3, AlgebraVector, GroupElement, MatrixLieGroup, euclidean

__all__ = [
    "SO3", "SE23", "SE23_R6", "euclidean", "MatrixLieGroup", "GroupElement", "AlgebraVector",
    "ConcentratedGaussian", "Handedness", "airm", "convert_handedness", "equivalence_gap",
    "SystemModel", "MeasurementModel", "MeasurementKind", "FilterState", "Hybrid", "Discrete",
    "initial_state", "predict_hybrid", "predict_discrete", "update", "reset", "step",
    "ContractError", "CutLocusError", "NumericError",
]
