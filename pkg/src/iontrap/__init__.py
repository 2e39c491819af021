__version__ = "0.1.0"
#* El orden de los imports es importante para evitar errores de importación circular.

# Primero las excepciones, para que estén disponibles al importar el paquete
from .iontrap_exceptions import (
    IonTrapError,
    ConfigurationError,
    DomainError,
    SearchError,
    NotATrapError,
    FitError,
    NearCollisionError,
    IntegrationError,
    IonLossError,
    AmbiguousSpectrumError,
    UnstableCrystalError,
    InfeasibleVoltageError,
    OptimizerStallError,
    GateInfeasibleError,
)
# Luego el contexto (modelos, enums y resultados)
from .context import (
    ElectrodeRole,
    Axis,
    DriftUnit,
    Electrode,
    RfDrive,
    TrapLayout,
    Species,
    SimConfig,
    TargetSpectrum,
    OptimizerConfig,
    GateConfig,
    DriftModel,
    ThermalState,
    RunConfig,
    Settings,
    SecularTriple,
    ModeSpectrum,
    PulseSolution,
    FidelityResult,
)

# Finalmente los módulos principales
from .electrode_field import (
    rect_potential,
    total_static_potential,
    rf_instantaneous_potential,
    pseudopotential,
    find_minimum,
    secular_frequencies,
    trap_depth,
    stability_q,
    lifetime_estimate,
    anharmonic_fit,
    analyze_wells,
)
from .ion_dynamics import LangevinIntegrator, run_equilibrium, relax_crystal, spectrum_from_trajectory
from .normal_modes import assemble_hessian, diagonalize, interaction_matrix, detect_segments, analyze_crystal
from .voltage_optimizer import FrequencyModel, LayoutFrequencyModel, AffineFrequencyModel, optimize
from .gate_engine import lamb_dicke, alpha, gamma_tensor, solve_pulse, apply_drift, fidelity, detuning_sweep

__all__ = [
    # Campo de electrodos
    "rect_potential",
    "total_static_potential",
    "rf_instantaneous_potential",
    "pseudopotential",
    "find_minimum",
    "secular_frequencies",
    "trap_depth",
    "stability_q",
    "lifetime_estimate",
    "anharmonic_fit",
    "analyze_wells",
    # Dinámica
    "LangevinIntegrator",
    "run_equilibrium",
    "relax_crystal",
    "spectrum_from_trajectory",
    # Modos normales
    "assemble_hessian",
    "diagonalize",
    "interaction_matrix",
    "detect_segments",
    "analyze_crystal",
    # Optimizador
    "FrequencyModel",
    "LayoutFrequencyModel",
    "AffineFrequencyModel",
    "optimize",
    # Compuertas
    "lamb_dicke",
    "alpha",
    "gamma_tensor",
    "solve_pulse",
    "apply_drift",
    "fidelity",
    "detuning_sweep",
    # Contexto
    "ElectrodeRole",
    "Axis",
    "DriftUnit",
    "Electrode",
    "RfDrive",
    "TrapLayout",
    "Species",
    "SimConfig",
    "TargetSpectrum",
    "OptimizerConfig",
    "GateConfig",
    "DriftModel",
    "ThermalState",
    "RunConfig",
    "Settings",
    "SecularTriple",
    "ModeSpectrum",
    "PulseSolution",
    "FidelityResult",
    # Excepciones
    "IonTrapError",
    "ConfigurationError",
    "DomainError",
    "SearchError",
    "NotATrapError",
    "FitError",
    "NearCollisionError",
    "IntegrationError",
    "IonLossError",
    "AmbiguousSpectrumError",
    "UnstableCrystalError",
    "InfeasibleVoltageError",
    "OptimizerStallError",
    "GateInfeasibleError",
]
