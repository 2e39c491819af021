from .Enums import ElectrodeRole, Axis, DriftUnit
from .Models import (
    AMU,
    SPECIES_CATALOG,
    Electrode,
    RfDrive,
    TrapLayout,
    Species,
    rf_preset,
    SimConfig,
    VoltageBounds,
    VoltageVector,
    TargetSpectrum,
    OptimizerConfig,
    GateConfig,
    DriftModel,
    ThermalState,
    RunConfig,
    Settings,
)
from .Results import (
    SecularTriple,
    AnharmonicFit,
    WellReport,
    Trajectory,
    EquilibriumResult,
    ModeSpectrum,
    InteractionMatrix,
    SegmentPartition,
    CouplingReport,
    CrystalAnalysis,
    AdamState,
    OptimizationResult,
    LambDickeMatrix,
    PulseSolution,
    FidelityResult,
)

__all__ = [
    "ElectrodeRole",
    "Axis",
    "DriftUnit",
    "AMU",
    "SPECIES_CATALOG",
    "Electrode",
    "RfDrive",
    "TrapLayout",
    "Species",
    "rf_preset",
    "SimConfig",
    "VoltageBounds",
    "VoltageVector",
    "TargetSpectrum",
    "OptimizerConfig",
    "GateConfig",
    "DriftModel",
    "ThermalState",
    "RunConfig",
    "Settings",
    "SecularTriple",
    "AnharmonicFit",
    "WellReport",
    "Trajectory",
    "EquilibriumResult",
    "ModeSpectrum",
    "InteractionMatrix",
    "SegmentPartition",
    "CouplingReport",
    "CrystalAnalysis",
    "AdamState",
    "OptimizationResult",
    "LambDickeMatrix",
    "PulseSolution",
    "FidelityResult",
]
