from .base import (
    ScalarField,
    ZeroField,
    SumField,
    PseudopotentialField,
    TrapPotentialField,
    TimeDependentField,
    fd_step,
    richardson_jacobian,
)
from .electrodes import ElectrodeField, unit_potentials, unit_gradients
from .synthetic import HarmonicBowl, LinearBias, QuarticDoubleWell, RfQuadrupole

__all__ = [
    "ScalarField",
    "ZeroField",
    "SumField",
    "PseudopotentialField",
    "TrapPotentialField",
    "TimeDependentField",
    "fd_step",
    "richardson_jacobian",
    "ElectrodeField",
    "unit_potentials",
    "unit_gradients",
    "HarmonicBowl",
    "LinearBias",
    "QuarticDoubleWell",
    "RfQuadrupole",
]
