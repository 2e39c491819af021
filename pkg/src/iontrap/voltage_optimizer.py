"""
Optimización de voltajes DC con Adam para alcanzar frecuencias seculares objetivo.

La pérdida es la norma cuadrática ponderada de la diferencia (en Hz) entre las
frecuencias calculadas y las deseadas. Cada evaluación vuelve a localizar los
mínimos de los pozos partiendo de los mínimos anteriores.
"""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from .context import (
    Axis,
    ElectrodeRole,
    RfDrive,
    Species,
    TrapLayout,
    TargetSpectrum,
    OptimizerConfig,
    VoltageBounds,
    AdamState,
    OptimizationResult,
)
from .electrode_field import secular_potential, find_minimum, secular_frequencies, escape_barriers
from .iontrap_exceptions import ConfigurationError, InfeasibleVoltageError, SearchError, NotATrapError

TWO_PI = 2 * np.pi


# -- Modelos de frecuencia --

class FrequencyModel(ABC):
    """
    Clase base abstracta: frecuencias seculares por sitio en función de los voltajes libres.
    """

    electrode_ids: list[str]
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_electrodes(self) -> int:
        return len(self.electrode_ids)

    @abstractmethod
    def evaluate(self, voltages: np.ndarray, guesses: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Calcula las frecuencias de cada sitio.

        Args:
            voltages: Voltajes de los electrodos libres.
            guesses: Posiciones iniciales para relocalizar los mínimos.

        Returns:
            (omega, minima): omega (n_sites, 3) en rad/s ordenado como (x, y, z)
            y minima (n_sites, 3) en metros.

        Raises:
            InfeasibleVoltageError: si algún pozo desaparece.
        """
        pass

    def depths(self, voltages: np.ndarray, minima: np.ndarray) -> np.ndarray:
        """Profundidad (meV) de cada pozo; infinita si el modelo no la define."""
        return np.full(len(minima), np.inf)

    def clip(self, voltages: np.ndarray) -> np.ndarray:
        return np.clip(voltages, self.lower, self.upper)


class AffineFrequencyModel(FrequencyModel):
    """Modelo cerrado ω² = a + B·V sobre un eje; los otros ejes repiten el mismo valor."""

    def __init__(self, a, B, electrode_ids: Optional[list[str]] = None, lower=None, upper=None):
        self.a = np.asarray(a, dtype=float)
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        n = self.B.shape[1]
        self.electrode_ids = electrode_ids or [f"E{k}" for k in range(n)]
        self.lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)

    def evaluate(self, voltages, guesses=None):
        omega2 = self.a + self.B @ np.asarray(voltages, dtype=float)
        bad = np.flatnonzero(omega2 <= 0)
        if len(bad):
            raise InfeasibleVoltageError(f"El sitio {bad[0]} pierde el confinamiento", site=int(bad[0]))
        omega = np.sqrt(omega2)
        return np.repeat(omega[:, None], 3, axis=1), np.zeros((len(omega), 3))


class LayoutFrequencyModel(FrequencyModel):
    """Frecuencias de los pozos del diseño, relocalizando cada mínimo en cada evaluación."""

    def __init__(self, layout: TrapLayout, drive: Optional[RfDrive], species: Species,
                 free_ids: Optional[Sequence[str]] = None, baseline: Optional[dict] = None,
                 bounds: Optional[VoltageBounds] = None, guesses: Optional[np.ndarray] = None,
                 box_height: float = 100e-6):
        self.layout = layout
        self.drive = drive or layout.drive
        self.species = species
        self.bounds = bounds or VoltageBounds()
        self.box_height = box_height
        if free_ids is None:
            free_ids = [e.id for e in layout.dc_electrodes if e.role is ElectrodeRole.DC_CENTRAL]
        unknown = set(free_ids) - set(layout.dc_ids)
        if unknown:
            raise ConfigurationError(f"Electrodos libres desconocidos: {sorted(unknown)}")
        self.electrode_ids = list(free_ids)
        self._free_index = [layout.dc_ids.index(eid) for eid in self.electrode_ids]
        self.baseline = layout.dc_vector(baseline or {})
        roles = {e.id: e.role for e in layout.dc_electrodes}
        self.lower = np.array([self.bounds.for_role(roles[eid])[0] for eid in self.electrode_ids])
        self.upper = np.array([self.bounds.for_role(roles[eid])[1] for eid in self.electrode_ids])
        self.guesses = layout.well_guesses() if guesses is None else np.atleast_2d(np.asarray(guesses, dtype=float))

    def free_voltages(self) -> np.ndarray:
        """Voltajes actuales de los electrodos libres en la línea base."""
        return self.baseline[self._free_index].copy()

    def full_vector(self, voltages: np.ndarray) -> np.ndarray:
        full = self.baseline.copy()
        full[self._free_index] = voltages
        return full

    def evaluate(self, voltages, guesses=None):
        field = secular_potential(self.layout, self.drive, self.species, self.full_vector(voltages))
        guesses = self.guesses if guesses is None else guesses
        omega, minima = [], []
        for site, guess in enumerate(guesses):
            try:
                minimum = find_minimum(field, guess)
                triple = secular_frequencies(field, minimum, self.species)
            except (SearchError, NotATrapError) as e:
                raise InfeasibleVoltageError(f"El pozo {site} desaparece con estos voltajes", site=site) from e
            omega.append(triple.cartesian())
            minima.append(minimum)
        return np.array(omega), np.array(minima)

    def depths(self, voltages, minima):
        field = secular_potential(self.layout, self.drive, self.species, self.full_vector(voltages))
        result = []
        for k, minimum in enumerate(minima):
            neighbors = [minima[j] for j in (k - 1, k + 1) if 0 <= j < len(minima)]
            barriers = escape_barriers(field, minimum, neighbors, self.box_height)
            values = [barriers["vertical"]] + ([barriers["interwell"]] if barriers["interwell"] is not None else [])
            result.append(min(values) * self.species.charge * 1e3)
        return np.array(result)


# -- Objetivos --

def explicit_targets(freqs_hz: Sequence[float], axis: str = "z", weights=None) -> TargetSpectrum:
    return TargetSpectrum.from_hz(freqs_hz, axis=axis, weights=weights)


def all_to_all_targets(omega: np.ndarray, axis: Axis = Axis.Z, weights=None) -> TargetSpectrum:
    """Todos los sitios a la frecuencia media actual sobre el eje."""
    current = np.asarray(omega)[:, axis.index]
    return TargetSpectrum(omega=[float(current.mean())] * len(current), axis=axis, weights=weights)


def pinned_pair_targets(omega: np.ndarray, pinned: Sequence[int], offset_hz: float,
                        axis: Axis = Axis.Z, weights=None) -> TargetSpectrum:
    """Los sitios fijados comparten una frecuencia desplazada offset_hz de la media del resto."""
    current = np.asarray(omega)[:, axis.index]
    pinned = list(pinned)
    rest = [k for k in range(len(current)) if k not in pinned]
    if not pinned or not rest:
        raise ConfigurationError("Se requieren sitios fijados y sitios restantes")
    base = float(current[rest].mean())
    targets = np.full(len(current), base)
    targets[pinned] = base + TWO_PI * offset_hz
    return TargetSpectrum(omega=targets.tolist(), axis=axis, weights=weights)


# -- Pérdida y gradiente --

def _site_omega(omega: np.ndarray, targets: TargetSpectrum) -> np.ndarray:
    if len(omega) != len(targets.omega):
        raise ConfigurationError(f"Hay {len(targets.omega)} objetivos para {len(omega)} sitios")
    return omega[:, targets.axis.index]


def max_site_error_hz(omega: np.ndarray, targets: TargetSpectrum) -> float:
    """Mayor error absoluto (Hz) entre los sitios con peso positivo."""
    weights = np.asarray(targets.weights)
    errors = np.abs(_site_omega(omega, targets) - np.asarray(targets.omega)) / TWO_PI
    active = errors[weights > 0]
    return float(active.max()) if len(active) else 0.0


def loss(voltages, targets: TargetSpectrum, model: FrequencyModel, guesses=None,
         depth_penalty: float = 0.0, depth_min_mev: float = 50.0) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Σ_sitios w_i (f_i(V) - f_i*)² en Hz², más la penalización opcional de profundidad.

    Returns:
        (valor, omega, minima) para reutilizar los mínimos como arranque en caliente.
    """
    voltages = np.asarray(voltages, dtype=float)
    omega, minima = model.evaluate(voltages, guesses)
    diff = (_site_omega(omega, targets) - np.asarray(targets.omega)) / TWO_PI
    value = float(np.sum(np.asarray(targets.weights) * diff**2))
    if depth_penalty > 0:
        shortfall = np.clip(depth_min_mev - model.depths(voltages, minima), 0.0, None)
        value += depth_penalty * float(np.sum(shortfall**2))
    return value, omega, minima


def gradient(voltages, targets: TargetSpectrum, model: FrequencyModel, guesses=None,
             step: float = 1e-3, subset: Optional[Sequence[int]] = None, threads: int = 1,
             depth_penalty: float = 0.0, depth_min_mev: float = 50.0) -> np.ndarray:
    """
    Gradiente por diferencias centrales con paso `step` (V) por electrodo.

    Las sondas son independientes y se evalúan en paralelo. Si una sonda es
    infactible se usa la diferencia unilateral con una advertencia.
    """
    voltages = np.asarray(voltages, dtype=float)
    indices = list(range(len(voltages))) if subset is None else sorted(subset)
    shifted = []
    for k in indices:
        for sign in (1.0, -1.0):
            v = voltages.copy()
            v[k] += sign * step
            shifted.append(v)

    def evaluate(v):
        try:
            return loss(v, targets, model, guesses, depth_penalty, depth_min_mev)[0]
        except InfeasibleVoltageError:
            return None

    with ThreadPoolExecutor(max_workers=threads) as pool:
        values = list(pool.map(evaluate, shifted))

    grad = np.zeros(len(voltages))
    base = None
    for n, k in enumerate(indices):
        plus, minus = values[2 * n], values[2 * n + 1]
        if plus is not None and minus is not None:
            grad[k] = (plus - minus) / (2 * step)
            continue
        if base is None:
            base = loss(voltages, targets, model, guesses, depth_penalty, depth_min_mev)[0]
        if plus is None and minus is None:
            raise InfeasibleVoltageError(f"Ambas sondas del electrodo {model.electrode_ids[k]} son infactibles")
        logger.warning(f"Sonda infactible en {model.electrode_ids[k]}; se usa diferencia unilateral")
        grad[k] = (plus - base) / step if plus is not None else (base - minus) / step
    return grad


def adam_step(state: AdamState, grad: np.ndarray, voltages: np.ndarray, lower=None,
              upper=None) -> tuple[AdamState, np.ndarray]:
    """Actualización de Adam con corrección de sesgo seguida de proyección a las cotas."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ConfigurationError("El gradiente y los momentos de Adam tienen dimensiones distintas")
    step = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    m_hat = m / (1 - state.beta1**step)
    v_hat = v / (1 - state.beta2**step)
    new_voltages = np.asarray(voltages, dtype=float) - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    if lower is not None or upper is not None:
        new_voltages = np.clip(new_voltages, lower, upper)
    new_state = AdamState(step=step, m=m, v=v, learning_rate=state.learning_rate,
                          beta1=state.beta1, beta2=state.beta2, epsilon=state.epsilon)
    return new_state, new_voltages


# -- Bucle de optimización --

def optimize(model: FrequencyModel, targets: TargetSpectrum, initial, config: Optional[OptimizerConfig] = None,
             rng: Optional[np.random.Generator] = None) -> OptimizationResult:
    """
    Optimiza los voltajes libres con Adam hasta que el error máximo por sitio sea menor que tol_hz.

    Se detiene por estancamiento si la mejor pérdida no baja más de stall_rtol (relativo)
    en stall_window iteraciones; en ese caso devuelve la mejor solución encontrada.
    """
    config = config or OptimizerConfig()
    rng = rng or np.random.default_rng(0)
    voltages = model.clip(np.asarray(initial, dtype=float))
    state = AdamState.zeros(len(voltages), learning_rate=config.learning_rate, beta1=config.beta1,
                            beta2=config.beta2, epsilon=config.epsilon)
    penalty = dict(depth_penalty=config.depth_penalty, depth_min_mev=config.depth_min_mev)

    value, omega, minima = loss(voltages, targets, model, None, **penalty)
    best = (value, voltages.copy(), omega, minima)
    history, best_history, iterations = [], [], []
    converged = stalled = False

    for it in range(config.max_iter + 1):
        error = max_site_error_hz(omega, targets)
        history.append(value)
        best_history.append(best[0])
        iterations.append({
            "loss": value,
            "voltages": voltages.tolist(),
            "site_frequencies_hz": (omega[:, targets.axis.index] / TWO_PI).tolist(),
        })
        logger.info(f"iter={it} loss={value:.6e} max_site_error_hz={error:.3f}")
        if error < config.tol_hz:
            converged = True
            break
        if it == config.max_iter:
            break
        if it >= config.stall_window:
            previous = best_history[it - config.stall_window]
            if previous - best[0] <= config.stall_rtol * max(abs(previous), 1e-300):
                stalled = True
                logger.warning(f"Optimización estancada tras {it} iteraciones")
                break

        subset = None
        if config.stochastic_subset is not None and config.stochastic_subset < len(voltages):
            subset = rng.choice(len(voltages), size=config.stochastic_subset, replace=False)
        grad = gradient(voltages, targets, model, minima, config.fd_step, subset, config.threads, **penalty)
        state, voltages = adam_step(state, grad, voltages, model.lower, model.upper)
        try:
            value, omega, minima = loss(voltages, targets, model, minima, **penalty)
        except InfeasibleVoltageError as e:
            logger.warning(f"Voltajes infactibles en la iteración {it + 1}: {e}")
            stalled = True
            break
        if value < best[0]:
            best = (value, voltages.copy(), omega, minima)

    final_value, final_voltages, final_omega, final_minima = best
    if converged:
        final_value, final_voltages, final_omega, final_minima = value, voltages, omega, minima

    lower_bad = final_voltages < model.lower - 1e-12
    upper_bad = final_voltages > model.upper + 1e-12
    bound_violations = [model.electrode_ids[k] for k in np.flatnonzero(lower_bad | upper_bad)]
    depths = model.depths(final_voltages, final_minima)
    depth_violations = [int(k) for k in np.flatnonzero(depths < config.depth_min_mev)]
    if depth_violations:
        logger.warning(f"Pozos con profundidad menor a {config.depth_min_mev} meV: {depth_violations}")
    if converged:
        logger.success(f"Optimización convergida con pérdida {final_value:.6e}")

    return OptimizationResult(
        voltages=final_voltages, loss_history=history, site_frequencies=final_omega,
        iterations=iterations, converged=converged, stalled=stalled,
        bound_violations=bound_violations, depth_violations=depth_violations,
    )


def sensitivity_report(model: FrequencyModel, baseline=None, delta: float = 6.0,
                       threads: int = 1) -> pd.DataFrame:
    """
    Cambio porcentual de (ω_x, ω_y, ω_z) en cada sitio al subir cada electrodo en `delta` volts.

    Returns:
        DataFrame con columnas electrode, site, dwx_pct, dwy_pct, dwz_pct, feasible.
    """
    baseline = np.zeros(model.n_electrodes) if baseline is None else np.asarray(baseline, dtype=float)
    omega0, minima0 = model.evaluate(baseline)

    def respond(k):
        v = baseline.copy()
        v[k] += delta
        try:
            return model.evaluate(v, minima0)[0]
        except InfeasibleVoltageError:
            return None

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(respond, range(model.n_electrodes)))

    rows = []
    for k, omega in enumerate(results):
        for site in range(len(omega0)):
            if omega is None:
                change = [np.nan] * 3
            else:
                change = (100 * (omega[site] - omega0[site]) / omega0[site]).tolist()
            rows.append({
                "electrode": model.electrode_ids[k], "site": site,
                "dwx_pct": change[0], "dwy_pct": change[1], "dwz_pct": change[2],
                "feasible": omega is not None,
            })
        if omega is None:
            logger.warning(f"La sonda del electrodo {model.electrode_ids[k]} es infactible")
    return pd.DataFrame(rows)
