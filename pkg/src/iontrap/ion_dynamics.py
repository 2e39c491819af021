"""
Dinámica clásica de iones en el potencial total dependiente del tiempo.

Integra las ecuaciones de Langevin m ẍ = F(x, t) - γ ẋ + f(t) con Verlet de
velocidades, obtiene posiciones de equilibrio promediadas sobre períodos de RF
y extrae frecuencias dominantes de las trayectorias.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy import constants
from scipy.optimize import minimize

from .context import Species, SimConfig, SecularTriple, Trajectory, EquilibriumResult, Axis
from .fields import TimeDependentField
from .normal_modes import coulomb_hessian, _species_list, MIN_SEPARATION
from .iontrap_exceptions import (
    ConfigurationError,
    NearCollisionError,
    IntegrationError,
    IonLossError,
    AmbiguousSpectrumError,
)

E_CHARGE = constants.e
K_COULOMB = 1 / (4 * np.pi * constants.epsilon_0)
K_B = constants.k
AVERAGING_STEPS_STATIC = 20


# -- Fuerzas y energía --

def coulomb_forces(positions: np.ndarray, charges: np.ndarray) -> np.ndarray:
    """Fuerzas de Coulomb (N) entre todos los pares; error si dos iones están a menos de 1 nm."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    if np.min(dist) < MIN_SEPARATION:
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        raise NearCollisionError(f"Los iones {i} y {j} están a {dist[i, j]:.3e} m")
    qq = K_COULOMB * E_CHARGE**2 * np.outer(charges, charges)
    return np.sum((qq / dist**3)[:, :, None] * diff, axis=1)


def coulomb_energy(positions: np.ndarray, charges: np.ndarray) -> float:
    """Energía de Coulomb (J) con la dependencia 1/r."""
    n = len(positions)
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    dist = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)[iu]
    return float(K_COULOMB * E_CHARGE**2 * np.sum(np.outer(charges, charges)[iu] / dist))


def force(trap: TimeDependentField, positions, t: float, charges) -> np.ndarray:
    """F_i = -Z_i e ∇φ(r_i, t) + Σ_j Z_i Z_j e² (r_i - r_j) / (4πε₀ r³)."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    charges = np.broadcast_to(np.asarray(charges, dtype=float), (len(positions),))
    external = -E_CHARGE * charges[:, None] * trap.gradients(positions, t)
    if len(positions) < 2:
        return external
    return external + coulomb_forces(positions, charges)


def potential_energy(trap: TimeDependentField, positions, t: float, charges) -> float:
    """Energía potencial instantánea (J): Σ Z e φ(r_i, t) + Coulomb."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    charges = np.broadcast_to(np.asarray(charges, dtype=float), (len(positions),))
    external = sum(E_CHARGE * q * trap.value(p, t) for p, q in zip(positions, charges))
    return float(external + coulomb_energy(positions, charges))


def time_averaged_energy(trap: TimeDependentField, positions, species: Sequence[Species]) -> float:
    """Energía promediada en el tiempo (J): pseudopotencial + DC + Coulomb."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    total = 0.0
    for p, sp in zip(positions, species):
        total += sp.charge * E_CHARGE * trap.secular_field(sp.charge, sp.mass).value(p)
    return float(total + coulomb_energy(positions, np.array([sp.charge for sp in species], dtype=float)))


def _averaged_gradient(trap: TimeDependentField, positions: np.ndarray, species: Sequence[Species]) -> np.ndarray:
    charges = np.array([sp.charge for sp in species], dtype=float)
    grad = np.array([
        sp.charge * E_CHARGE * trap.secular_field(sp.charge, sp.mass).gradient(p)
        for p, sp in zip(positions, species)
    ])
    if len(positions) > 1:
        grad -= coulomb_forces(positions, charges)
    return grad


def relax_crystal(trap: TimeDependentField, species, initial, newton_steps: int = 3) -> np.ndarray:
    """
    Minimiza directamente la energía promediada en el tiempo.

    Usa BFGS en coordenadas escaladas (μm, eV) y pule el resultado con pasos de Newton
    sobre la rigidez del cristal.
    """
    initial = np.atleast_2d(np.asarray(initial, dtype=float))
    species = _species_list(species, len(initial))
    scale_x, scale_e = 1e-6, E_CHARGE

    res = minimize(
        lambda u: time_averaged_energy(trap, u.reshape(-1, 3) * scale_x, species) / scale_e,
        initial.ravel() / scale_x,
        jac=lambda u: _averaged_gradient(trap, u.reshape(-1, 3) * scale_x, species).ravel() * scale_x / scale_e,
        method="BFGS",
        options={"gtol": 1e-12, "maxiter": 2000},
    )
    positions = res.x.reshape(-1, 3) * scale_x

    charges = [sp.charge for sp in species]
    for _ in range(newton_steps):
        stiffness = coulomb_hessian(positions, charges)
        for i, sp in enumerate(species):
            field = trap.secular_field(sp.charge, sp.mass)
            stiffness[3 * i:3 * i + 3, 3 * i:3 * i + 3] += sp.charge * E_CHARGE * field.hessian(positions[i])
        grad = _averaged_gradient(trap, positions, species).ravel()
        positions = positions - np.linalg.solve(stiffness, grad).reshape(-1, 3)
    logger.debug(f"Cristal relajado con {len(positions)} iones")
    return positions


# -- Integración --

@dataclass
class IonState:
    """Estado instantáneo: posiciones, velocidades, fuerzas y tiempo."""
    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray
    t: float
    step: int = 0


class LangevinIntegrator:
    """
    Integrador de Verlet de velocidades con fricción semiimplícita y ruido de impulso.

    El ruido por paso y por eje tiene desviación estándar f_i·sqrt(dt), con
    f_i = sqrt(2 γ_i k_B T) salvo que se indique noise_amplitude.
    """

    def __init__(self, trap: TimeDependentField, species: Sequence[Species], config: SimConfig,
                 damping: Optional[np.ndarray] = None):
        if trap.omega_rf is not None:
            config.check_time_step(trap.omega_rf)
        self.trap = trap
        self.species = list(species)
        self.config = config
        n = len(self.species)
        self.masses = np.array([sp.mass for sp in self.species])
        self.charges = np.array([sp.charge for sp in self.species], dtype=float)

        gamma = damping if damping is not None else config.damping
        gamma = np.zeros(n) if gamma is None else np.broadcast_to(np.asarray(gamma, dtype=float), (n,)).copy()
        if np.any(gamma < 0):
            raise ConfigurationError("El amortiguamiento debe ser no negativo")
        self.gamma = gamma
        if config.noise_amplitude is not None:
            self.noise = np.broadcast_to(np.asarray(config.noise_amplitude, dtype=float), (n,)).copy()
        else:
            self.noise = np.sqrt(2 * self.gamma * K_B * config.temperature)
        self.rng = np.random.default_rng(config.rng_seed)
        self.noise_enabled = True

    def initial_state(self, positions, velocities=None, t: float = 0.0) -> IonState:
        positions = np.atleast_2d(np.asarray(positions, dtype=float)).copy()
        velocities = np.zeros_like(positions) if velocities is None else np.asarray(velocities, dtype=float).copy()
        return IonState(positions, velocities, force(self.trap, positions, t, self.charges), t)

    def step_verlet(self, state: IonState, check_loss: bool = True) -> IonState:
        """
        Un paso de Verlet de velocidades con los términos de Langevin F - γv + f(t).

        Las posiciones nuevas se revisan antes de evaluar las fuerzas. Un ion sobre el
        plano (z <= 0) siempre cuenta como perdido; la caja solo si check_loss es True.

        Raises:
            IonLossError: si algún ion cae sobre el plano o sale de la caja.
            IntegrationError: si aparecen valores no finitos.
        """
        dt = self.config.dt
        m = self.masses[:, None]
        g = self.gamma[:, None]
        half = state.velocities + dt / (2 * m) * (state.forces - g * state.velocities)
        positions = state.positions + dt * half
        t = state.t + dt
        if not np.all(np.isfinite(positions)):
            raise IntegrationError(f"Valores no finitos en el paso {state.step + 1}", step=state.step + 1)
        self.check_loss(positions, t, box=check_loss)
        forces = force(self.trap, positions, t, self.charges)
        kick = np.zeros_like(positions)
        if self.noise_enabled and np.any(self.noise > 0):
            kick = self.rng.normal(0.0, 1.0, positions.shape) * (self.noise * np.sqrt(dt))[:, None]
        velocities = (half + dt / (2 * m) * forces + kick / m) / (1 + g * dt / (2 * m))
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(velocities))):
            raise IntegrationError(f"Valores no finitos en el paso {state.step + 1}", step=state.step + 1)
        return IonState(positions, velocities, forces, t, state.step + 1)

    def check_loss(self, positions: np.ndarray, t: float, box: bool = True) -> None:
        """Lanza IonLossError si algún ion cae sobre el plano o, con box=True, sale de la caja."""
        p = np.asarray(positions)
        lost = p[:, 2] <= 0
        if box:
            w = self.config.box_half_width
            lost = lost | (np.abs(p[:, 0]) > w) | (np.abs(p[:, 1]) > w) | (p[:, 2] > 2 * w)
        if np.any(lost):
            ion = int(np.flatnonzero(lost)[0])
            raise IonLossError(f"El ion {ion} escapó de la trampa en t={t:.3e} s", ion=ion, time=t)

    def run(self, state: IonState, n_steps: int, record_every: Optional[int] = None,
            check_loss: bool = True) -> tuple[IonState, Trajectory]:
        """Avanza n_steps pasos y registra la trayectoria cada record_every pasos."""
        record_every = record_every or self.config.record_every
        times, positions, velocities = [state.t], [state.positions.copy()], [state.velocities.copy()]
        for k in range(1, n_steps + 1):
            state = self.step_verlet(state, check_loss=check_loss)
            if k % record_every == 0:
                times.append(state.t)
                positions.append(state.positions.copy())
                velocities.append(state.velocities.copy())
        return state, Trajectory(np.array(times), np.array(positions), np.array(velocities))


# -- Equilibrio --

def default_damping(trap: TimeDependentField, species: Sequence[Species], positions) -> np.ndarray:
    """γ_i = m_i ω_min, con ω_min la frecuencia secular local más baja del conjunto."""
    omegas = []
    for p, sp in zip(np.atleast_2d(positions), species):
        eig = np.linalg.eigvalsh(trap.secular_field(sp.charge, sp.mass).hessian(p))
        eig = eig[eig > 0]
        if len(eig):
            omegas.append(np.sqrt(sp.charge * E_CHARGE * eig.min() / sp.mass))
    if not omegas:
        raise ConfigurationError("No hay curvatura positiva para fijar el amortiguamiento por defecto")
    omega_min = min(omegas)
    return np.array([sp.mass * omega_min for sp in species])


def seed_positions(wells: Sequence[SecularTriple], ions_per_well: Sequence[int], sp: Species) -> np.ndarray:
    """Coloca n iones por pozo como cadena lineal en x alrededor del mínimo."""
    if len(ions_per_well) != len(wells):
        raise ConfigurationError(f"ions_per_well tiene {len(ions_per_well)} entradas para {len(wells)} pozos")
    seeds = []
    for triple, n in zip(wells, ions_per_well):
        if n <= 0:
            continue
        omega_x = triple.along(Axis.X)
        spacing = 1.2 * (K_COULOMB * sp.charge**2 * E_CHARGE**2 / (sp.mass * omega_x**2)) ** (1 / 3)
        for j in range(n):
            seeds.append(triple.minimum + np.array([(j - 0.5 * (n - 1)) * spacing, 0.0, 0.0]))
    return np.array(seeds).reshape(-1, 3)


def _averaging_steps(trap: TimeDependentField, config: SimConfig) -> tuple[int, int]:
    """Pasos por ventana de promedio y número de ventanas."""
    if trap.omega_rf is None:
        return 1, AVERAGING_STEPS_STATIC
    per_period = max(1, int(round(2 * np.pi / trap.omega_rf / config.dt)))
    return per_period, config.averaging_periods


def run_equilibrium(trap: TimeDependentField, species, initial, config: SimConfig) -> EquilibriumResult:
    """
    Evoluciona con amortiguamiento y ruido, asienta sin ruido y promedia en períodos de RF.

    Raises:
        IonLossError: si algún ion escapa durante la evolución.
    """
    initial = np.atleast_2d(np.asarray(initial, dtype=float))
    species = _species_list(species, len(initial))
    damping = None if config.damping is not None else default_damping(trap, species, initial)
    integrator = LangevinIntegrator(trap, species, config, damping=damping)
    logger.info(f"Simulando {len(initial)} iones durante {config.n_steps} pasos (dt={config.dt:.3e} s)")

    state = integrator.initial_state(initial)
    state, thermal = integrator.run(state, config.n_steps)
    integrator.noise_enabled = False
    state, settle = integrator.run(state, config.settle_steps)

    per_period, n_windows = _averaging_steps(trap, config)
    state, window = integrator.run(state, per_period * n_windows, record_every=1)
    samples = window.positions[1:]
    period_means = samples.reshape(n_windows, per_period, *samples.shape[1:]).mean(axis=1)
    positions = period_means.mean(axis=0)
    residual = float(np.max(np.abs(period_means - positions[None, :, :])))
    if residual > 1e-9:
        logger.warning(f"Amplitud residual {residual:.3e} m supera 1 nm; aumente settle_steps o el amortiguamiento")

    trajectory = Trajectory(
        times=np.concatenate([thermal.times, settle.times[1:]]),
        positions=np.concatenate([thermal.positions, settle.positions[1:]]),
        velocities=np.concatenate([thermal.velocities, settle.velocities[1:]]),
    )
    logger.success(f"Equilibrio alcanzado; amplitud residual {residual:.3e} m")
    return EquilibriumResult(positions=positions, residual_amplitude=residual, trajectory=trajectory)


# -- Espectro --

def spectrum_from_trajectory(traj: Trajectory, ion: int, axis: Axis, f_min: float = 0.0,
                             f_max: Optional[float] = None) -> float:
    """
    Frecuencia dominante (Hz) de una coordenada, con ventana de Hann e interpolación parabólica.

    Args:
        traj: Trayectoria con muestreo uniforme.
        ion: Índice del ion.
        axis: Eje cartesiano.
        f_min, f_max: Banda opcional donde buscar el pico.

    Raises:
        AmbiguousSpectrumError: si el pico no supera 10 veces la mediana del espectro.
    """
    signal = traj.positions[:, ion, axis.index]
    signal = signal - signal.mean()
    n = len(signal)
    dt = float(np.mean(np.diff(traj.times)))
    mags = np.abs(np.fft.rfft(signal * np.hanning(n)))
    freqs = np.fft.rfftfreq(n, dt)

    band = (freqs > max(f_min, 0.0)) & (freqs <= (f_max if f_max is not None else np.inf))
    candidates = np.flatnonzero(band)
    if len(candidates) < 3:
        raise AmbiguousSpectrumError("La banda de búsqueda contiene menos de 3 frecuencias")
    k = int(candidates[np.argmax(mags[candidates])])
    floor = float(np.median(mags[1:]))
    if mags[k] < 10 * floor:
        raise AmbiguousSpectrumError(f"El pico ({mags[k]:.3e}) no supera 10 veces el piso ({floor:.3e})")
    if 0 < k < len(mags) - 1:
        a, b, c = mags[k - 1], mags[k], mags[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return float((k + shift) * freqs[1])
