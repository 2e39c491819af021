# Resultados numéricos inmutables que producen los módulos de cálculo
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .Enums import Axis


@dataclass(frozen=True)
class SecularTriple:
    """Frecuencias seculares (rad/s), ejes principales (columnas) y posición del mínimo (m)."""
    omega: np.ndarray
    principal_axes: np.ndarray
    minimum: np.ndarray

    @property
    def omega_hz(self) -> np.ndarray:
        return self.omega / (2 * np.pi)

    def axis_labels(self) -> list[str]:
        """Eje cartesiano con el que se alinea más cada modo secular."""
        return ["xyz"[int(np.argmax(np.abs(self.principal_axes[:, k])))] for k in range(3)]

    def along(self, axis: Axis) -> float:
        """Frecuencia del modo cuyo eje principal está más alineado con el eje dado."""
        k = int(np.argmax(np.abs(self.principal_axes[axis.index, :])))
        return float(self.omega[k])

    def cartesian(self) -> np.ndarray:
        """Frecuencias reordenadas como (ω_x, ω_y, ω_z) según la alineación de los ejes."""
        return np.array([self.along(a) for a in (Axis.X, Axis.Y, Axis.Z)])


@dataclass(frozen=True)
class AnharmonicFit:
    """Coeficientes κ_n del desarrollo axial y escalas derivadas."""
    kappa2: float
    kappa3: float
    kappa4: float
    lambda3: Optional[float]
    lambda4: Optional[float]
    char_length: float
    alpha: float
    condition_number: float


@dataclass(frozen=True)
class WellReport:
    """Resumen de un pozo de la trampa."""
    index: int
    secular: SecularTriple
    depth_mev: float
    depth_bounded_by_box: bool
    q: float
    stable: bool
    anisotropy: float
    linear_crystal: bool

    def as_row(self) -> dict:
        fx, fy, fz = self.secular.cartesian() / (2 * np.pi)
        x, y, z = self.secular.minimum
        return {
            "well": self.index,
            "x_m": x, "y_m": y, "z_m": z,
            "fx_hz": fx, "fy_hz": fy, "fz_hz": fz,
            "depth_mev": self.depth_mev,
            "depth_bounded_by_box": self.depth_bounded_by_box,
            "q": self.q,
            "stable": self.stable,
            "anisotropy": self.anisotropy,
            "linear_crystal": self.linear_crystal,
        }


@dataclass(frozen=True)
class Trajectory:
    """Trayectoria muestreada: tiempos (T,), posiciones y velocidades (T, N, 3)."""
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        if not (len(self.times) == len(self.positions) == len(self.velocities)):
            raise ValueError("times, positions y velocities deben tener la misma longitud")

    @property
    def n_ions(self) -> int:
        return self.positions.shape[1]

    def to_frame(self) -> pd.DataFrame:
        """Formato largo con columnas t, ion, x, y, z, vx, vy, vz."""
        n_t, n_ions, _ = self.positions.shape
        return pd.DataFrame({
            "t": np.repeat(self.times, n_ions),
            "ion": np.tile(np.arange(n_ions), n_t),
            "x": self.positions[:, :, 0].ravel(),
            "y": self.positions[:, :, 1].ravel(),
            "z": self.positions[:, :, 2].ravel(),
            "vx": self.velocities[:, :, 0].ravel(),
            "vy": self.velocities[:, :, 1].ravel(),
            "vz": self.velocities[:, :, 2].ravel(),
        })


@dataclass(frozen=True)
class EquilibriumResult:
    """Posiciones de equilibrio promediadas en períodos de RF y amplitud residual."""
    positions: np.ndarray
    residual_amplitude: float
    trajectory: Optional[Trajectory] = None

    @property
    def height_spread(self) -> float:
        z = self.positions[:, 2]
        return float((z.max() - z.min()) / z.mean())


@dataclass(frozen=True)
class ModeSpectrum:
    """Frecuencias normales ascendentes y matriz de vectores b (filas = iones o coordenadas)."""
    axis: Axis
    omega: np.ndarray
    b: np.ndarray

    @property
    def omega_hz(self) -> np.ndarray:
        return self.omega / (2 * np.pi)

    @property
    def n_modes(self) -> int:
        return len(self.omega)

    def com_index(self) -> int:
        """Modo de centro de masa: el de mayor |Σ_i b_im|."""
        return int(np.argmax(np.abs(self.b.sum(axis=0))))

    def subset(self, modes) -> "ModeSpectrum":
        modes = list(modes)
        return ModeSpectrum(axis=self.axis, omega=self.omega[modes], b=self.b[:, modes])

    def to_dict(self) -> dict:
        return {
            "axis": self.axis.value,
            "frequencies_hz": self.omega_hz.tolist(),
            "eigenvectors": self.b.tolist(),
        }


@dataclass(frozen=True)
class InteractionMatrix:
    """Matriz b reescalada por modo: cada columna tiene al menos una entrada igual a +1."""
    M: np.ndarray


@dataclass(frozen=True)
class SegmentPartition:
    """Partición de iones y modos en segmentos independientes."""
    segments: list[tuple[frozenset, frozenset]]
    threshold: float

    def segment_of_ion(self, ion: int) -> tuple[frozenset, frozenset]:
        for ions, modes in self.segments:
            if ion in ions:
                return ions, modes
        raise KeyError(ion)

    def to_list(self) -> list[dict]:
        return [{"ions": sorted(i), "modes": sorted(m)} for i, m in self.segments]


@dataclass(frozen=True)
class CouplingReport:
    """Acoplamiento dipolar entre dos sitios y su desintonía."""
    pair: tuple[int, int]
    omega_i: float
    omega_j: float
    Omega_I: float
    delta_minus: float
    coupled: bool

    def as_row(self) -> dict:
        i, j = self.pair
        return {
            "i": i, "j": j,
            "f_i_hz": self.omega_i / (2 * np.pi),
            "f_j_hz": self.omega_j / (2 * np.pi),
            "coupling_hz": self.Omega_I / (2 * np.pi),
            "delta_minus_hz": self.delta_minus / (2 * np.pi),
            "coupled": self.coupled,
        }


@dataclass(frozen=True)
class CrystalAnalysis:
    """Salida completa del análisis de modos de un cristal."""
    sites: list[SecularTriple]
    spectra: dict
    interaction: dict
    partitions: dict
    per_axis: bool
    couplings: list[CouplingReport] = field(default_factory=list)


@dataclass
class AdamState:
    """Estado de Adam: contador de pasos y momentos."""
    step: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> "AdamState":
        return cls(step=0, m=np.zeros(size), v=np.zeros(size), **hyper)


@dataclass(frozen=True)
class OptimizationResult:
    """Resultado de una optimización de voltajes."""
    voltages: np.ndarray
    loss_history: list[float]
    site_frequencies: np.ndarray
    iterations: list[dict]
    converged: bool
    stalled: bool
    bound_violations: list[str] = field(default_factory=list)
    depth_violations: list[int] = field(default_factory=list)

    @property
    def flags(self) -> dict:
        return {
            "converged": self.converged,
            "stalled": self.stalled,
            "bounds_ok": not self.bound_violations,
            "depth_ok": not self.depth_violations,
            "bound_violations": list(self.bound_violations),
            "depth_violations": list(self.depth_violations),
        }


@dataclass(frozen=True)
class LambDickeMatrix:
    """Parámetros de Lamb-Dicke η (iones x modos)."""
    eta: np.ndarray


@dataclass(frozen=True)
class PulseSolution:
    """Pulso segmentado en amplitud que cierra las trayectorias de los modos del segmento."""
    omega_s: np.ndarray
    mu: float
    t_g: float
    residual_alpha: np.ndarray
    chi: float
    chi_target: float = np.pi / 4
    cap_exceeded: bool = False

    @property
    def max_rabi(self) -> float:
        return float(np.max(np.abs(self.omega_s)))

    def to_dict(self) -> dict:
        return {
            "t_g_s": self.t_g,
            "mu_hz": self.mu / (2 * np.pi),
            "omega_s_hz": (self.omega_s / (2 * np.pi)).tolist(),
            "chi": self.chi,
            "chi_target": self.chi_target,
            "cap_exceeded": self.cap_exceeded,
            "residual_alpha": np.abs(self.residual_alpha).tolist(),
        }


@dataclass(frozen=True)
class FidelityResult:
    """Desglose de la fidelidad de la compuerta."""
    delta_chi: float
    alpha: np.ndarray
    gamma_i: float
    gamma_j: float
    gamma_plus: float
    gamma_minus: float
    fidelity: float

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity
