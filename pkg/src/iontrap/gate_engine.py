"""
Síntesis y evaluación de compuertas Mølmer–Sørensen segmentadas en amplitud.

El tiempo de compuerta se divide en 2N+1 intervalos de frecuencia de Rabi
constante. Las amplitudes cierran todos los desplazamientos espín-movimiento
de los modos del segmento al final de la compuerta y llevan la fase de dos
qubits a π/4. La fidelidad se evalúa luego sobre el espectro completo, con
deriva lineal de frecuencias y ocupación térmica.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy.constants import hbar as HBAR
from scipy.linalg import eigh, null_space

from .context import (
    Axis,
    GateConfig,
    DriftModel,
    ThermalState,
    ModeSpectrum,
    LambDickeMatrix,
    PulseSolution,
    FidelityResult,
)
from .iontrap_exceptions import ConfigurationError, GateInfeasibleError
from .normal_modes import SpeciesArg, _species_list

LAMB_DICKE_WARNING = 0.3
SMALL_PHASE = 1e-2
SMALL_OFFSET = 1e-6

EtaArg = Union[LambDickeMatrix, np.ndarray]


# -- Integrales cerradas por intervalo --

def _phase_integral(x):
    """g(x) = ∫_0^1 exp(i x s) ds, precisa alrededor de x = 0."""
    x = np.asarray(x, dtype=float)
    return np.sinc(x / np.pi) + 1j * np.sin(x / 2) * np.sinc(x / (2 * np.pi))


def _phase_integral_derivative(x):
    """g'(x) = i ∫_0^1 s exp(i x s) ds."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SMALL_PHASE
    xs = np.where(small, 1.0, x)
    closed = (xs * np.exp(1j * xs) + 1j * (np.exp(1j * xs) - 1)) / xs**2
    series = 0.5j - x / 3 - 1j * x**2 / 8 + x**3 / 30 + 1j * x**4 / 144 - x**5 / 840
    return np.where(small, series, closed)


def _exp_integral(nu, a, b):
    """∫_a^b exp(i ν t) dt."""
    length = b - a
    return np.exp(1j * nu * a) * length * _phase_integral(nu * length)


def _nested_exp_integral(nu, kappa, a, b):
    """∫_a^b dt2 exp(i ν t2) ∫_a^t2 dt1 exp(i κ t1), con el límite κ -> 0."""
    length = b - a
    x = nu * length
    y = kappa * length
    small = np.abs(y) < SMALL_OFFSET
    ys = np.where(small, 1.0, y)
    quotient = np.where(
        small,
        _phase_integral_derivative(x + y / 2),
        (_phase_integral(x + ys) - _phase_integral(x)) / ys,
    )
    return np.exp(1j * (nu + kappa) * a) * length**2 * quotient / 1j


def _interval_integrals(mu: float, omega: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """∫ sin(μt) exp(iωt) dt en cada intervalo; omega tiene forma (modos, intervalos)."""
    a, b = edges[:-1], edges[1:]
    return (_exp_integral(omega + mu, a, b) - _exp_integral(omega - mu, a, b)) / 2j


def _diagonal_blocks(mu: float, omega: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Integral doble ordenada de sin(μt2) sin(μt1) sin(ω(t2 - t1)) dentro de un intervalo."""
    a, b = edges[:-1], edges[1:]
    total = np.zeros(omega.shape, dtype=complex)
    for p in (1.0, -1.0):
        for q in (1.0, -1.0):
            total += p * q * _nested_exp_integral(p * mu + omega, q * mu - omega, a, b)
    return np.imag(-0.25 * total)


def _eta_array(eta: EtaArg) -> np.ndarray:
    return np.asarray(eta.eta if isinstance(eta, LambDickeMatrix) else eta, dtype=float)


def _per_interval(omega_m, n_segments: int) -> np.ndarray:
    omega_m = np.asarray(omega_m, dtype=float)
    if omega_m.ndim == 1:
        return np.repeat(omega_m[:, None], n_segments, axis=1)
    if omega_m.shape[1] != n_segments:
        raise ConfigurationError(
            f"Las frecuencias por intervalo tienen {omega_m.shape[1]} columnas y hay {n_segments} intervalos"
        )
    return omega_m


# -- Operaciones públicas --

def lamb_dicke(spectrum: ModeSpectrum, species: SpeciesArg, config: GateConfig) -> LambDickeMatrix:
    """
    Parámetros de Lamb-Dicke η_{i,m} = Δk · b_{i,m} · sqrt(ħ / (2 m_i ω_m)).

    Args:
        spectrum: Espectro de modos sobre un único eje cartesiano.
        species: Una especie para todos los iones o una por ion.
        config: Configuración de la compuerta con el vector de onda efectivo.

    Returns:
        Matriz de Lamb-Dicke (iones x modos).
    """
    if spectrum.axis is Axis.FULL3N:
        raise ConfigurationError("La compuerta requiere un espectro sobre un único eje")
    if np.any(spectrum.omega <= 0):
        raise ConfigurationError("Las frecuencias de los modos deben ser positivas")
    masses = np.array([sp.mass for sp in _species_list(species, spectrum.b.shape[0])])
    eta = config.delta_k * spectrum.b * np.sqrt(HBAR / (2 * masses[:, None] * spectrum.omega[None, :]))
    largest = float(np.max(np.abs(eta))) if eta.size else 0.0
    if largest > LAMB_DICKE_WARNING:
        logger.warning(f"|η| = {largest:.3f} supera {LAMB_DICKE_WARNING}: fuera del régimen de Lamb-Dicke")
    return LambDickeMatrix(eta=eta)


def alpha(omega_s, mu: float, t_g: float, eta: EtaArg, omega_m) -> np.ndarray:
    """
    Desplazamiento espín-movimiento α_{i,m}(t_g) con frecuencias de Rabi constantes por tramos.

    Args:
        omega_s: Frecuencia de Rabi en cada intervalo (rad/s).
        mu: Desintonía del campo bicromático (rad/s).
        t_g: Duración de la compuerta (s).
        eta: Matriz de Lamb-Dicke (iones x modos).
        omega_m: Frecuencias de los modos, (modos,) o por intervalo (modos, intervalos).

    Returns:
        Arreglo complejo (iones x modos).
    """
    omega_s = np.asarray(omega_s, dtype=float)
    edges = np.linspace(0.0, t_g, len(omega_s) + 1)
    omega = _per_interval(omega_m, len(omega_s))
    per_mode = _interval_integrals(mu, omega, edges) @ omega_s
    return 1j * _eta_array(eta) * per_mode[None, :]


def gamma_tensor(config: GateConfig, eta: EtaArg, omega_m) -> np.ndarray:
    """
    Γ_{rs} del par de iones configurado, sumado sobre los modos dados.

    La entrada (r, s) es la integral doble ordenada con t2 en el intervalo r y
    t1 en el intervalo s (t1 <= t2); la matriz es triangular inferior. La fase
    es χ = Ωᵀ Γ Ω.
    """
    edges = config.edges()
    omega = _per_interval(omega_m, config.n_segments)
    eta = _eta_array(eta)
    i, j = config.pair
    weights = 2 * eta[i] * eta[j]

    integrals = _interval_integrals(config.mu, omega, edges)
    cross = np.imag(integrals[:, :, None] * np.conj(integrals[:, None, :]))
    blocks = np.tril(cross, k=-1)
    idx = np.arange(config.n_segments)
    blocks[:, idx, idx] = _diagonal_blocks(config.mu, omega, edges)
    return np.tensordot(weights, blocks, axes=1)


def geometric_phase(omega_s, gamma: np.ndarray) -> float:
    omega_s = np.asarray(omega_s, dtype=float)
    return float(omega_s @ gamma @ omega_s)


def solve_pulse(config: GateConfig, spectrum: ModeSpectrum, eta: EtaArg) -> PulseSolution:
    """
    Amplitudes de Rabi que cierran todos los modos del segmento y alcanzan χ = π/4.

    Las restricciones de desplazamiento no dependen del ion: cada modo aporta dos
    ecuaciones reales. Los candidatos son los autovectores de la forma de fase
    restringida a su espacio nulo, escalados a la fase objetivo; gana el de menor
    amplitud máxima.

    Raises:
        GateInfeasibleError: si el espacio nulo está vacío o ninguna dirección
            alcanza la fase objetivo.
    """
    n_seg = config.n_segments
    omega = _per_interval(spectrum.omega, n_seg)
    integrals = _interval_integrals(config.mu, omega, config.edges())
    constraints = np.vstack([integrals.real, integrals.imag])
    if constraints.shape[0] >= n_seg:
        raise GateInfeasibleError(
            f"{spectrum.n_modes} modos requieren más de {n_seg} intervalos; aumente n_segments"
        )
    basis = null_space(constraints)
    if basis.shape[1] == 0:
        raise GateInfeasibleError(f"Espacio nulo vacío para μ/2π = {config.mu / (2 * np.pi):.3f} Hz")

    gamma = gamma_tensor(config, eta, omega)
    symmetric = (gamma + gamma.T) / 2
    eigvals, eigvecs = eigh(basis.T @ symmetric @ basis)
    scale = float(np.max(np.abs(eigvals)))
    if scale == 0:
        raise GateInfeasibleError("La fase geométrica es nula en todo el espacio nulo")

    targets = [np.pi / 4] + ([-np.pi / 4] if config.allow_negative_phase else [])
    candidates = []
    for target in targets:
        for lam, vec in zip(eigvals, eigvecs.T):
            if lam * target > 1e-12 * scale:
                omega_s = basis @ vec * np.sqrt(target / lam)
                candidates.append((float(np.max(np.abs(omega_s))), target, omega_s))
        if candidates:
            break
    if not candidates:
        raise GateInfeasibleError(f"χ = π/4 es inalcanzable para μ/2π = {config.mu / (2 * np.pi):.3f} Hz")

    _, target, omega_s = min(candidates, key=lambda c: c[0])
    lead = np.flatnonzero(np.abs(omega_s) > 1e-12 * np.max(np.abs(omega_s)))[0]
    omega_s = omega_s * np.sign(omega_s[lead])
    if target < 0:
        logger.warning("Solo se alcanza χ = -π/4; se acepta la fase negativa")

    residual = alpha(omega_s, config.mu, config.t_g, eta, omega)
    cap_exceeded = bool(np.max(np.abs(omega_s)) > config.rabi_cap)
    if cap_exceeded:
        logger.warning(
            f"max|Ω_s|/2π = {np.max(np.abs(omega_s)) / (2 * np.pi):.4g} Hz supera la cota "
            f"{config.rabi_cap / (2 * np.pi):.4g} Hz"
        )
    return PulseSolution(
        omega_s=omega_s, mu=config.mu, t_g=config.t_g, residual_alpha=residual,
        chi=geometric_phase(omega_s, gamma), chi_target=target, cap_exceeded=cap_exceeded,
    )


def apply_drift(omega_m, drift: Optional[DriftModel], t_p: float, n_segments: int) -> np.ndarray:
    """
    Frecuencias por intervalo ω_m + γ (s - 1/2) t_p, muestreadas en el punto medio de cada intervalo.

    Returns:
        Arreglo (modos x intervalos) en rad/s.
    """
    omega_m = np.asarray(omega_m, dtype=float)
    gamma = drift.gamma if drift is not None else 0.0
    midpoints = (np.arange(1, n_segments + 1) - 0.5) * t_p
    return omega_m[:, None] + gamma * midpoints[None, :]


def fidelity(pulse: PulseSolution, spectrum: ModeSpectrum, eta: EtaArg,
             thermal: Optional[ThermalState] = None, drift: Optional[DriftModel] = None,
             pair: tuple[int, int] = (0, 1)) -> FidelityResult:
    """
    Fidelidad de la compuerta según los desplazamientos residuales de todos los modos y el error de fase.

    Args:
        pulse: Pulso resuelto, normalmente solo con los modos del segmento.
        spectrum: Espectro completo de la cadena.
        eta: Matriz de Lamb-Dicke correspondiente a `spectrum`.
        thermal: Ocupación inicial del modo COM del par; estado fundamental si se omite.
        drift: Deriva lineal de frecuencias aplicada por intervalo.
        pair: Índices de los iones de la compuerta.

    Returns:
        FidelityResult con los factores Γ y el error de fase.
    """
    n_seg = len(pulse.omega_s)
    omega = apply_drift(spectrum.omega, drift, pulse.t_g / n_seg, n_seg)
    displacement = alpha(pulse.omega_s, pulse.mu, pulse.t_g, eta, omega)

    phase_config = GateConfig(pair=pair, t_g=pulse.t_g, mu=pulse.mu, n_segments=n_seg)
    chi = geometric_phase(pulse.omega_s, gamma_tensor(phase_config, eta, omega))
    delta_chi = pulse.chi_target - chi

    beta = thermal.beta(spectrum.omega) if thermal is not None else np.ones(spectrum.n_modes)
    i, j = pair
    a_i, a_j = displacement[i], displacement[j]
    gamma_i = float(np.exp(-2 * np.sum(np.abs(a_i) ** 2 * beta)))
    gamma_j = float(np.exp(-2 * np.sum(np.abs(a_j) ** 2 * beta)))
    gamma_plus = float(np.exp(-2 * np.sum(np.abs(a_i + a_j) ** 2 * beta)))
    gamma_minus = float(np.exp(-2 * np.sum(np.abs(a_i - a_j) ** 2 * beta)))
    value = (2 + 2 * (gamma_i + gamma_j) * np.cos(2 * delta_chi) + gamma_plus + gamma_minus) / 8

    return FidelityResult(
        delta_chi=float(delta_chi), alpha=displacement, gamma_i=gamma_i, gamma_j=gamma_j,
        gamma_plus=gamma_plus, gamma_minus=gamma_minus, fidelity=float(value),
    )


def sweep_grid(start_hz: float, stop_hz: float, step_hz: float) -> np.ndarray:
    """Desintonías en Hz de start a stop (inclusive) con paso fijo."""
    if step_hz <= 0:
        raise ConfigurationError("El paso del barrido debe ser positivo")
    if stop_hz < start_hz:
        raise ConfigurationError("El barrido requiere stop_hz >= start_hz")
    count = int(np.floor((stop_hz - start_hz) / step_hz + 1e-9)) + 1
    return start_hz + step_hz * np.arange(count)


def detuning_sweep(mu_hz: Sequence[float], template: GateConfig, segment: ModeSpectrum,
                   spectrum: ModeSpectrum, species: SpeciesArg, thermal: Optional[ThermalState] = None,
                   drift: Optional[DriftModel] = None, threads: int = 1,
                   reuse_pulse: bool = False) -> pd.DataFrame:
    """
    Resuelve el pulso en cada desintonía y evalúa su fidelidad.

    Los puntos son independientes y se evalúan en un grupo de hilos; las filas
    siguen el orden de `mu_hz`. Una desintonía infactible deja una fila marcada
    en lugar de abortar.

    Returns:
        DataFrame con columnas mu_hz, infidelity, max_rabi_hz, feasible.
    """
    mu_hz = np.asarray(mu_hz, dtype=float)
    eta_segment = lamb_dicke(segment, species, template)
    eta_full = lamb_dicke(spectrum, species, template)
    logger.info(f"Barrido de {len(mu_hz)} desintonías con {threads} hilo(s)")

    shared = None
    if reuse_pulse:
        for value in mu_hz:
            try:
                shared = solve_pulse(template.model_copy(update={"mu": 2 * np.pi * value}), segment, eta_segment)
                break
            except GateInfeasibleError:
                continue

    def point(value: float) -> dict:
        mu = 2 * np.pi * value
        try:
            if reuse_pulse:
                if shared is None:
                    raise GateInfeasibleError("Ninguna desintonía del barrido admite un pulso")
                pulse = replace(shared, mu=mu)
            else:
                pulse = solve_pulse(template.model_copy(update={"mu": mu}), segment, eta_segment)
        except GateInfeasibleError:
            return {"mu_hz": value, "infidelity": np.nan, "max_rabi_hz": np.nan, "feasible": False}
        result = fidelity(pulse, spectrum, eta_full, thermal, drift, template.pair)
        return {
            "mu_hz": value,
            "infidelity": result.infidelity,
            "max_rabi_hz": pulse.max_rabi / (2 * np.pi),
            "feasible": True,
        }

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(point, mu_hz))
    frame = pd.DataFrame(rows, columns=["mu_hz", "infidelity", "max_rabi_hz", "feasible"])
    infeasible = int((~frame["feasible"]).sum())
    if infeasible:
        logger.warning(f"{infeasible} desintonías sin pulso factible")
    return frame


def rabi_table(mu_hz: Sequence[float], template: GateConfig, segment: ModeSpectrum,
               species: SpeciesArg) -> pd.DataFrame:
    """Frecuencia de Rabi (Hz) por intervalo para cada desintonía; NaN donde no hay pulso factible."""
    eta = lamb_dicke(segment, species, template)
    columns = [f"s{k + 1}" for k in range(template.n_segments)]
    rows = []
    for value in mu_hz:
        try:
            pulse = solve_pulse(template.model_copy(update={"mu": 2 * np.pi * value}), segment, eta)
            rows.append(pulse.omega_s / (2 * np.pi))
        except GateInfeasibleError:
            rows.append(np.full(template.n_segments, np.nan))
    return pd.DataFrame(rows, columns=columns, index=pd.Index(np.asarray(mu_hz, dtype=float), name="mu_hz"))


def synthetic_pair_spectrum(center_hz: float, splitting_hz: float, axis: Axis = Axis.X) -> ModeSpectrum:
    """Espectro COM/stretch de dos iones centrado en `center_hz`, con el COM debajo del stretch."""
    omega = 2 * np.pi * np.array([center_hz - splitting_hz / 2, center_hz + splitting_hz / 2])
    b = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    return ModeSpectrum(axis=axis, omega=omega, b=b)
