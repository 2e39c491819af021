import json
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from scipy import constants

from ..iontrap_exceptions import ConfigurationError
from .Enums import Axis, DriftUnit, ElectrodeRole

AMU = constants.physical_constants["atomic mass constant"][0]

# Catálogo de especies con su preajuste de RF (V_RF de 0 a pico, Ω_RF/2π)
SPECIES_CATALOG = {
    "Ca40": {"mass_amu": 39.9626, "charge": 1, "v_rf": 80.0, "omega_rf_hz": 110e6},
    "Be9": {"mass_amu": 9.01218, "charge": 1, "v_rf": 85.0, "omega_rf_hz": 240e6},
}


def _read_json(path: Path) -> dict:
    """Lee un JSON y convierte los errores de parseo en ConfigurationError con línea/columna."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigurationError(f"Archivo no encontrado: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(
            f"JSON inválido en {path} (línea {e.lineno}, columna {e.colno}): {e.msg}"
        ) from e


# 1. Geometría de la trampa

class Electrode(BaseModel):
    """Electrodo rectangular definido por dos vértices opuestos (en metros)."""
    id: str
    role: ElectrodeRole
    xa: float
    ya: float
    xb: float
    yb: float

    @field_validator("role", mode="before")
    @classmethod
    def _parse_role(cls, value):
        if isinstance(value, str):
            return ElectrodeRole.from_label(value)
        return value

    @model_validator(mode="after")
    def _check_corners(self):
        if self.xa == self.xb or self.ya == self.yb:
            raise ValueError(f"El electrodo '{self.id}' tiene área nula: sus vértices comparten una coordenada")
        return self

    @property
    def corner_a(self) -> tuple[float, float]:
        return (self.xa, self.ya)

    @property
    def corner_b(self) -> tuple[float, float]:
        return (self.xb, self.yb)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(x1, x2, y1, y2) con x1 < x2 e y1 < y2."""
        return (min(self.xa, self.xb), max(self.xa, self.xb), min(self.ya, self.yb), max(self.ya, self.yb))

    @property
    def center(self) -> tuple[float, float]:
        x1, x2, y1, y2 = self.bounds
        return (0.5 * (x1 + x2), 0.5 * (y1 + y2))

    def overlaps(self, other: "Electrode") -> bool:
        """True si los interiores de ambos rectángulos se intersectan (compartir borde está permitido)."""
        ax1, ax2, ay1, ay2 = self.bounds
        bx1, bx2, by1, by2 = other.bounds
        return min(ax2, bx2) > max(ax1, bx1) and min(ay2, by2) > max(ay1, by1)


class RfDrive(BaseModel):
    """Parámetros del voltaje de RF (amplitud de 0 a pico y frecuencia angular)."""
    v_rf: float = Field(..., gt=0, description="Amplitud de RF en volts (0 a pico)")
    omega_rf: float = Field(..., gt=0, description="Frecuencia angular de RF en rad/s")

    @model_validator(mode="before")
    @classmethod
    def _from_hz(cls, data):
        if isinstance(data, dict) and "omega_rf" not in data and "omega_rf_hz" in data:
            data = dict(data)
            data["omega_rf"] = 2 * np.pi * float(data.pop("omega_rf_hz"))
        return data

    @property
    def omega_rf_hz(self) -> float:
        return self.omega_rf / (2 * np.pi)

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega_rf

    def phase(self, role: ElectrodeRole) -> float:
        """Fase de la RF según el rol: 0 para RF+, π para RF-."""
        if role is ElectrodeRole.RF_MINUS:
            return float(np.pi)
        return 0.0

    def amplitude(self, role: ElectrodeRole) -> float:
        """Amplitud con signo del electrodo: +v_rf, -v_rf o 0 para electrodos DC."""
        if not role.is_rf:
            return 0.0
        return self.v_rf * float(np.cos(self.phase(role)))


class TrapLayout(BaseModel):
    """Conjunto de electrodos de la trampa junto con el accionamiento de RF."""
    name: str = "layout"
    electrodes: list[Electrode] = []
    drive: RfDrive
    wells: Optional[list[tuple[float, float, float]]] = None

    @model_validator(mode="after")
    def _check_electrodes(self):
        ids = [e.id for e in self.electrodes]
        if len(ids) != len(set(ids)):
            raise ValueError("Los identificadores de electrodos deben ser únicos")
        for i, first in enumerate(self.electrodes):
            for second in self.electrodes[i + 1:]:
                if first.overlaps(second):
                    raise ValueError(f"Los electrodos '{first.id}' y '{second.id}' se superponen")
        return self

    @property
    def dc_electrodes(self) -> list[Electrode]:
        """Electrodos DC con voltaje controlable (los GROUND quedan fijos en 0 V)."""
        return [e for e in self.electrodes if e.role.is_dc and e.role is not ElectrodeRole.GROUND]

    @property
    def rf_electrodes(self) -> list[Electrode]:
        return [e for e in self.electrodes if e.role.is_rf]

    @property
    def dc_ids(self) -> list[str]:
        return [e.id for e in self.dc_electrodes]

    def dc_vector(self, voltages: Optional[dict[str, float]] = None) -> np.ndarray:
        """Convierte un mapeo id -> volts en el vector ordenado de voltajes DC (faltantes en 0 V)."""
        voltages = voltages or {}
        unknown = set(voltages) - set(self.dc_ids)
        if unknown:
            raise ConfigurationError(f"Electrodos DC desconocidos en el conjunto de voltajes: {sorted(unknown)}")
        return np.array([float(voltages.get(eid, 0.0)) for eid in self.dc_ids])

    def well_guesses(self, height: float = 20e-6) -> np.ndarray:
        """Posiciones iniciales de los pozos: la lista explícita o los centros de los DC centrales."""
        if self.wells:
            return np.asarray(self.wells, dtype=float)
        centers = [(*e.center, height) for e in self.electrodes if e.role is ElectrodeRole.DC_CENTRAL]
        centers.sort(key=lambda c: (c[0], c[1]))
        return np.asarray(centers, dtype=float).reshape(-1, 3)

    @classmethod
    def from_json(cls, path: Path):
        """Crea un TrapLayout desde el archivo JSON del diseño."""
        logger.info(f"Cargando diseño de trampa desde {path}")
        return cls.model_validate(_read_json(path))


class Species(BaseModel):
    """Especie iónica: masa en kg y número de carga Z."""
    label: str
    mass: float = Field(..., gt=0)
    charge: int = Field(1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _from_amu(cls, data):
        if isinstance(data, dict) and "mass" not in data and "mass_amu" in data:
            data = dict(data)
            data["mass"] = float(data.pop("mass_amu")) * AMU
        return data

    @property
    def mass_amu(self) -> float:
        return self.mass / AMU

    @classmethod
    def from_json(cls, path: Path):
        """Crea una especie desde un archivo JSON {label, mass_amu, charge}."""
        logger.info(f"Cargando especie desde {path}")
        return cls.model_validate(_read_json(path))

    @classmethod
    def from_catalog(cls, label: str):
        if label not in SPECIES_CATALOG:
            raise ConfigurationError(f"Especie desconocida: {label}. Disponibles: {sorted(SPECIES_CATALOG)}")
        entry = SPECIES_CATALOG[label]
        return cls(label=label, mass_amu=entry["mass_amu"], charge=entry["charge"])


def rf_preset(label: str) -> RfDrive:
    """Accionamiento de RF recomendado para una especie del catálogo."""
    if label not in SPECIES_CATALOG:
        raise ConfigurationError(f"No hay preajuste de RF para la especie: {label}")
    entry = SPECIES_CATALOG[label]
    return RfDrive(v_rf=entry["v_rf"], omega_rf_hz=entry["omega_rf_hz"])


# 2. Dinámica

class SimConfig(BaseModel):
    """Parámetros de la integración de Langevin."""
    dt: float = Field(..., gt=0, description="Paso de tiempo en segundos")
    n_steps: int = Field(..., gt=0)
    damping: Optional[float | list[float]] = Field(None, description="γ_i en kg/s (escalar o por ion)")
    temperature: float = Field(0.5e-3, ge=0, description="Temperatura objetivo del ruido en K")
    noise_amplitude: Optional[float | list[float]] = Field(
        None, description="Amplitud del ruido en N·s^1/2; si falta se usa sqrt(2 γ k_B T)"
    )
    rng_seed: int = 0
    record_every: int = Field(1, ge=1)
    averaging_periods: int = Field(20, ge=1)
    settle_steps: int = Field(0, ge=0)
    box_half_width: float = Field(500e-6, gt=0, description="Semiancho de la caja de confinamiento en m")

    def check_time_step(self, omega_rf: float) -> None:
        """El paso no puede superar una vigésima parte del período de RF."""
        limit = (2 * np.pi / omega_rf) / 20
        if self.dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={self.dt:.3e} s excede 1/20 del período de RF ({limit:.3e} s)"
            )


# 3. Optimización de voltajes

class VoltageBounds(BaseModel):
    """Intervalos permitidos por rol de electrodo, en volts."""
    central: tuple[float, float] = (0.0, 6.0)
    side: tuple[float, float] = (-15.0, 15.0)
    edge: tuple[float, float] = (-15.0, 15.0)

    def for_role(self, role: ElectrodeRole) -> tuple[float, float]:
        mapping = {
            ElectrodeRole.DC_CENTRAL: self.central,
            ElectrodeRole.DC_SIDE: self.side,
            ElectrodeRole.DC_EDGE: self.edge,
        }
        return mapping.get(role, (0.0, 0.0))


class VoltageVector(BaseModel):
    """Voltajes por electrodo DC junto con sus cotas."""
    ids: list[str]
    values: list[float]
    lower: list[float]
    upper: list[float]

    @model_validator(mode="after")
    def _check_lengths(self):
        if not (len(self.ids) == len(self.values) == len(self.lower) == len(self.upper)):
            raise ValueError("ids, values y cotas deben tener la misma longitud")
        return self

    @classmethod
    def for_layout(cls, layout: TrapLayout, voltages: Optional[dict[str, float]] = None,
                   bounds: Optional[VoltageBounds] = None):
        bounds = bounds or VoltageBounds()
        values = layout.dc_vector(voltages)
        lows, highs = zip(*[bounds.for_role(e.role) for e in layout.dc_electrodes]) if layout.dc_electrodes else ((), ())
        return cls(ids=layout.dc_ids, values=list(values), lower=list(lows), upper=list(highs))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def violations(self, tol: float = 1e-12) -> list[str]:
        """Electrodos cuyo voltaje queda fuera de sus cotas."""
        return [
            eid for eid, v, lo, hi in zip(self.ids, self.values, self.lower, self.upper)
            if v < lo - tol or v > hi + tol
        ]

    def to_mapping(self) -> dict[str, float]:
        return dict(zip(self.ids, self.values))


class TargetSpectrum(BaseModel):
    """Frecuencias seculares objetivo por sitio (rad/s) sobre un eje, con pesos."""
    omega: list[float]
    axis: Axis = Axis.Z
    weights: Optional[list[float]] = None

    @field_validator("axis", mode="before")
    @classmethod
    def _parse_axis(cls, value):
        if isinstance(value, str):
            return Axis.from_label(value)
        return value

    @model_validator(mode="after")
    def _check(self):
        if any(w <= 0 for w in self.omega):
            raise ValueError("Las frecuencias objetivo deben ser positivas")
        if self.axis is Axis.FULL3N:
            raise ValueError("El objetivo debe referirse a un eje cartesiano")
        if self.weights is None:
            self.weights = [1.0] * len(self.omega)
        if len(self.weights) != len(self.omega):
            raise ValueError("weights y omega deben tener la misma longitud")
        if any(w < 0 for w in self.weights):
            raise ValueError("Los pesos deben ser no negativos")
        return self

    @classmethod
    def from_hz(cls, freqs_hz, axis="z", weights=None):
        return cls(omega=[2 * np.pi * f for f in freqs_hz], axis=axis, weights=weights)


class OptimizerConfig(BaseModel):
    """Hiperparámetros de Adam y criterios de parada."""
    learning_rate: float = Field(0.05, gt=0, description="Tasa de aprendizaje en volts")
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iter: int = Field(2000, gt=0)
    tol_hz: float = Field(10.0, gt=0, description="Error máximo por sitio para detenerse")
    fd_step: float = Field(1e-3, gt=0, description="Paso de diferencias finitas en volts")
    stall_window: int = Field(50, gt=0)
    stall_rtol: float = 1e-12
    depth_min_mev: float = 50.0
    depth_penalty: float = Field(0.0, ge=0, description="Peso de la penalización de profundidad (0 = desactivada)")
    stochastic_subset: Optional[int] = Field(None, gt=0)
    threads: int = Field(1, ge=1)
    bounds: VoltageBounds = VoltageBounds()


# 4. Compuertas MS

class GateConfig(BaseModel):
    """Configuración de una compuerta Mølmer–Sørensen segmentada en amplitud."""
    pair: tuple[int, int] = (0, 1)
    t_g: float = Field(200e-6, gt=0, description="Duración de la compuerta en s")
    mu: float = Field(..., gt=0, description="Desintonía del campo bicromático en rad/s")
    n_segments: int = 5
    wavelength: float = Field(313.2e-9, gt=0)
    beam_angle: float = Field(np.pi / 6, description="Ángulo entre los haces y el eje, en rad")
    geometry_factor: float = Field(2.0, gt=0)
    rabi_cap: float = Field(2 * np.pi * 0.25e6, gt=0, description="Cota de |Ω_s| en rad/s")
    allow_negative_phase: bool = False

    @model_validator(mode="before")
    @classmethod
    def _from_hz(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            if "mu" not in data and "mu_hz" in data:
                data["mu"] = 2 * np.pi * float(data.pop("mu_hz"))
            if "rabi_cap" not in data and "rabi_cap_hz" in data:
                data["rabi_cap"] = 2 * np.pi * float(data.pop("rabi_cap_hz"))
            if "beam_angle" not in data and "beam_angle_deg" in data:
                data["beam_angle"] = np.deg2rad(float(data.pop("beam_angle_deg")))
        return data

    @model_validator(mode="after")
    def _check(self):
        if self.n_segments < 3 or self.n_segments % 2 == 0:
            raise ValueError("n_segments debe ser impar y >= 3")
        if self.pair[0] == self.pair[1]:
            raise ValueError("La compuerta requiere dos iones distintos")
        return self

    @property
    def t_p(self) -> float:
        return self.t_g / self.n_segments

    @property
    def delta_k(self) -> float:
        """Vector de onda efectivo proyectado sobre el eje."""
        return self.geometry_factor * (2 * np.pi / self.wavelength) * np.cos(self.beam_angle)

    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.t_g, self.n_segments + 1)


class DriftModel(BaseModel):
    """Deriva lineal de las frecuencias normales: ω_m(t) = ω_m + γ t."""
    rate: float = 0.0
    unit: DriftUnit = DriftUnit.HZ_PER_MIN

    @model_validator(mode="after")
    def _check_range(self):
        rate_hz_min = abs(self.rate) if self.unit is DriftUnit.HZ_PER_MIN else abs(self.rate) / (2 * np.pi)
        if rate_hz_min and not (100.0 <= rate_hz_min <= 1e6):
            logger.warning(f"Tasa de deriva {rate_hz_min:.3g} Hz/min fuera del rango estudiado (100 Hz/min a 1 MHz/min)")
        return self

    @property
    def gamma(self) -> float:
        """Tasa de deriva en rad/s por segundo."""
        if self.unit is DriftUnit.HZ_PER_MIN:
            return 2 * np.pi * self.rate / 60.0
        return self.rate / 60.0


class ThermalState(BaseModel):
    """Ocupación térmica del modo de centro de masa del par."""
    n_bar_c: float = Field(0.0, ge=0)
    omega_c: float = Field(..., gt=0)

    def beta(self, omega_m) -> np.ndarray:
        """β_m = coth[(ω_m / 2ω_c) ln(1 + 1/n̄_c)]; tiende a 1 cuando n̄_c -> 0."""
        omega_m = np.asarray(omega_m, dtype=float)
        if self.n_bar_c == 0:
            return np.ones_like(omega_m)
        arg = omega_m / (2 * self.omega_c) * np.log1p(1.0 / self.n_bar_c)
        return 1.0 / np.tanh(arg)


# 5. Configuración de ejecución (YAML) y variables de entorno

class SliceGrid(BaseModel):
    x_min: float = -60e-6
    x_max: float = 60e-6
    nx: int = Field(121, gt=1)
    z_min: float = 5e-6
    z_max: float = 60e-6
    nz: int = Field(56, gt=1)
    y: float = 0.0


class TrapShowBlock(BaseModel):
    height_guess: float = 20e-6
    slice: SliceGrid = SliceGrid()
    depth_box: float = Field(100e-6, gt=0, description="Altura máxima del escaneo vertical en m")
    anisotropy_limit: float = 0.4


class SimulateBlock(BaseModel):
    ions_per_well: Optional[list[int]] = None
    steps_per_rf_period: int = Field(20, ge=20)
    n_steps: int = Field(4000, gt=0)
    settle_steps: int = Field(2000, ge=0)
    temperature: float = Field(0.5e-3, ge=0)
    damping: Optional[float] = None
    record_every: int = Field(10, ge=1)

    def to_sim_config(self, drive: RfDrive, seed: int) -> SimConfig:
        return SimConfig(
            dt=drive.period / self.steps_per_rf_period,
            n_steps=self.n_steps,
            damping=self.damping,
            temperature=self.temperature,
            rng_seed=seed,
            record_every=self.record_every,
            settle_steps=self.settle_steps,
        )


class ModesBlock(BaseModel):
    axis: Literal["x", "y", "z", "auto"] = "auto"
    equilibria: Optional[Path] = None
    ions_per_well: Optional[list[int]] = None
    threshold: float = Field(1e-4, gt=0)
    anharmonic: bool = False
    anharmonic_window: float = Field(1.5e-6, gt=0)
    anharmonic_pair: Optional[list[int]] = Field(None, description="Par fijado; por defecto el par central")
    anharmonic_ions: list[int] = [2, 3]
    anharmonic_resonant: bool = True


class OptimizeBlock(BaseModel):
    mode: Literal["explicit", "all_to_all", "pinned"] = "all_to_all"
    axis: Literal["x", "y", "z"] = "z"
    sites: Optional[list[int]] = None
    targets_hz: Optional[list[float]] = None
    weights: Optional[list[float]] = None
    pinned_sites: list[int] = [4, 5]
    pinned_offset_hz: float = 50e3
    free_electrodes: Optional[list[str]] = None
    optimizer: OptimizerConfig = OptimizerConfig()


class SweepBlock(BaseModel):
    start_hz: float
    stop_hz: float
    step_hz: float = Field(2.0, gt=0)
    reuse_pulse: bool = False


class SyntheticPair(BaseModel):
    center_hz: float = Field(..., gt=0)
    splitting_hz: float = Field(..., gt=0)


class GateBlock(BaseModel):
    pair: tuple[int, int] = (0, 1)
    t_g: float = 200e-6
    mu_hz: float | list[float] = 22.42e6
    n_segments: int = 5
    wavelength: float = 313.2e-9
    beam_angle_deg: float = 30.0
    geometry_factor: float = 2.0
    rabi_cap_hz: float = 0.25e6
    allow_negative_phase: bool = False
    spectrum: Optional[Path] = None
    segment_modes: Optional[list[int]] = None
    synthetic_pair: Optional[SyntheticPair] = None
    drift: DriftModel = DriftModel()
    n_bar_c: float = Field(0.0, ge=0)
    sweep: Optional[SweepBlock] = None

    def gate_config(self, mu_hz: float) -> GateConfig:
        return GateConfig(
            pair=self.pair, t_g=self.t_g, mu_hz=mu_hz, n_segments=self.n_segments,
            wavelength=self.wavelength, beam_angle_deg=self.beam_angle_deg,
            geometry_factor=self.geometry_factor, rabi_cap_hz=self.rabi_cap_hz,
            allow_negative_phase=self.allow_negative_phase,
        )


class RunConfig(BaseModel):
    """Configuración de una ejecución de la CLI, cargada desde YAML."""
    layout: Optional[Path] = None
    species: str = "Ca40"
    dc_voltages: Optional[Path] = None
    output_dir: Optional[Path] = None
    seed: int = 0
    trap_show: TrapShowBlock = TrapShowBlock()
    sim: SimulateBlock = SimulateBlock()
    modes: ModesBlock = ModesBlock()
    optimize: OptimizeBlock = OptimizeBlock()
    gate: GateBlock = GateBlock()
    source_path: Optional[Path] = Field(None, exclude=True)

    def referenced_files(self) -> list[Path]:
        """Archivos de datos que forman parte del hash de configuración."""
        candidates = [self.layout, self.dc_voltages, self.modes.equilibria, self.gate.spectrum]
        species_path = Path(self.species)
        if species_path.suffix == ".json":
            candidates.append(species_path)
        return [Path(p) for p in candidates if p is not None]

    def load_species(self) -> Species:
        if Path(self.species).suffix == ".json":
            return Species.from_json(Path(self.species))
        return Species.from_catalog(self.species)

    def load_layout(self) -> TrapLayout:
        if self.layout is None:
            raise ConfigurationError("La configuración no define 'layout'")
        return TrapLayout.from_json(self.layout)

    def load_dc_voltages(self) -> dict[str, float]:
        if self.dc_voltages is None:
            return {}
        data = _read_json(self.dc_voltages)
        if not isinstance(data, dict):
            raise ConfigurationError(f"{self.dc_voltages} debe ser un objeto {{id: volts}}")
        return {str(k): float(v) for k, v in data.items()}

    @classmethod
    def from_yaml(cls, config_path: Path):
        """Crea una instancia de RunConfig desde un archivo YAML, resolviendo rutas relativas."""
        config_path = Path(config_path)
        logger.info(f"Cargando configuración desde {config_path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ConfigurationError(f"Archivo de configuración no encontrado: {config_path}") from e
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" (línea {mark.line + 1}, columna {mark.column + 1})" if mark is not None else ""
            raise ConfigurationError(f"Error al parsear YAML {config_path}{where}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{config_path} debe contener un mapeo en la raíz")

        base = config_path.parent
        config = cls.model_validate(data)
        config = config._resolve_paths(base)
        config.source_path = config_path
        for path in config.referenced_files():
            if not path.exists():
                raise ConfigurationError(f"Archivo referenciado inexistente: {path}")
        return config

    def _resolve_paths(self, base: Path) -> "RunConfig":
        def resolve(p: Optional[Path]) -> Optional[Path]:
            if p is None or Path(p).is_absolute():
                return p
            return base / p

        updates = {
            "layout": resolve(self.layout),
            "dc_voltages": resolve(self.dc_voltages),
            "output_dir": resolve(self.output_dir),
            "modes": self.modes.model_copy(update={"equilibria": resolve(self.modes.equilibria)}),
            "gate": self.gate.model_copy(update={"spectrum": resolve(self.gate.spectrum)}),
        }
        if Path(self.species).suffix == ".json":
            updates["species"] = str(resolve(Path(self.species)))
        return self.model_copy(update=updates)


class Settings(BaseSettings):
    """
    Gestiona la configuración de la aplicación a través de variables de entorno.
    Pydantic leerá automáticamente las variables con prefijo IONTRAP_.
    """
    log: Literal["error", "warn", "info", "debug"] = Field("info", description="Nivel de log (IONTRAP_LOG)")
    threads: int = Field(1, ge=1, description="Máximo de hilos para barridos y gradientes")
    output_dir: Path = Field(Path("output"), description="Directorio de salida por defecto")

    model_config = SettingsConfigDict(env_prefix="IONTRAP_", env_file=".env", env_file_encoding="utf-8", extra="ignore")

    @field_validator("log", mode="before")
    @classmethod
    def _normalize_log(cls, value):
        return value.lower() if isinstance(value, str) else value

    @property
    def log_level(self) -> str:
        return {"error": "ERROR", "warn": "WARNING", "info": "INFO", "debug": "DEBUG"}[self.log]
