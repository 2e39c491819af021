# tests/test_ion_dynamics.py
from pathlib import Path

import numpy as np
import pytest
from scipy.constants import e as E_CHARGE, epsilon_0

from iontrap import (
    Axis,
    ConfigurationError,
    LangevinIntegrator,
    SecularTriple,
    SimConfig,
    Species,
    TrapLayout,
    relax_crystal,
    run_equilibrium,
    secular_frequencies,
    spectrum_from_trajectory,
)
from iontrap.context import Trajectory
from iontrap.electrode_field import trap_field
from iontrap.fields import HarmonicBowl, RfQuadrupole, TimeDependentField, ZeroField
from iontrap.ion_dynamics import coulomb_forces, force, potential_energy, seed_positions
from iontrap.iontrap_exceptions import AmbiguousSpectrumError, IonLossError, NearCollisionError

TWO_PI = 2 * np.pi
K_COULOMB = 1 / (4 * np.pi * epsilon_0)
CENTER = np.array([0.0, 0.0, 50e-6])
LAYOUTS = Path(__file__).resolve().parents[1] / "config" / "layouts"


@pytest.fixture
def ca40() -> Species:
    return Species.from_catalog("Ca40")


@pytest.fixture
def static_bowl(ca40: Species) -> TimeDependentField:
    # ω_x = 2π·1 MHz y radiales 5 veces más rígidas
    kx = ca40.mass * (TWO_PI * 1.0e6) ** 2 / E_CHARGE
    return TimeDependentField(HarmonicBowl(CENTER, [kx, 25 * kx, 25 * kx]))


def _rf_trap(species: Species, q: float, omega_rf: float) -> TimeDependentField:
    """Cuadrupolo de RF puro en x-y con parámetro de Mathieu q y confinamiento DC en z."""
    kappa = q * species.mass * omega_rf**2 / (2 * E_CHARGE)
    return TimeDependentField(
        HarmonicBowl(CENTER, [0.0, 0.0, 1e7]),
        rf_amplitude=RfQuadrupole(kappa, center=CENTER),
        omega_rf=omega_rf,
    )


def _chain(n: int, spacing: float = 5e-6) -> np.ndarray:
    x = spacing * (np.arange(n) - 0.5 * (n - 1))
    seeds = CENTER + np.stack([x, np.zeros(n), np.zeros(n)], axis=-1)
    # Pequeña perturbación transversal para relajar en 3D
    seeds[:, 1] += 0.1e-6 * (-1) ** np.arange(n)
    seeds[:, 2] += 0.2e-6
    return seeds


# -- Pruebas para las fuerzas --

def test_force_matches_finite_difference_of_energy(ca40: Species):
    # Arrange
    omega_rf = TWO_PI * 10e6
    trap = _rf_trap(ca40, q=0.3, omega_rf=omega_rf)
    positions = CENTER + np.array([[-5e-6, 0.3e-6, 0.1e-6], [0.2e-6, -0.4e-6, 0.0], [5.5e-6, 0.1e-6, -0.2e-6]])
    charges = np.ones(3)
    t = 0.3 * TWO_PI / omega_rf
    h = 1e-10

    # Act
    forces = force(trap, positions, t, charges)

    # Assert
    expected = np.zeros_like(positions)
    for i in range(3):
        for k in range(3):
            plus, minus = positions.copy(), positions.copy()
            plus[i, k] += h
            minus[i, k] -= h
            expected[i, k] = -(potential_energy(trap, plus, t, charges)
                               - potential_energy(trap, minus, t, charges)) / (2 * h)
    scale = np.max(np.abs(expected))
    assert forces == pytest.approx(expected, rel=1e-6, abs=1e-6 * scale)


def test_single_ion_force_is_external_only(static_bowl: TimeDependentField):
    p = CENTER + np.array([1e-6, 0.0, 0.0])

    f = force(static_bowl, [p], 0.0, [1])

    assert f[0] == pytest.approx(-E_CHARGE * static_bowl.dc.gradient(p))


def test_coulomb_forces_reject_near_collisions():
    positions = np.array([[0.0, 0.0, 50e-6], [0.5e-9, 0.0, 50e-6]])

    with pytest.raises(NearCollisionError):
        coulomb_forces(positions, np.ones(2))


# -- Pruebas para el integrador --

def test_secular_frequency_from_rf_trajectory(ca40: Species):
    # Arrange: q = 0.1 con Ω = 2π·10 MHz; ω ≈ qΩ/(2√2) ≈ 2π·353.6 kHz
    omega_rf = TWO_PI * 10e6
    trap = _rf_trap(ca40, q=0.1, omega_rf=omega_rf)
    config = SimConfig(dt=TWO_PI / omega_rf / 40, n_steps=80000, damping=0.0, temperature=0.0)
    integrator = LangevinIntegrator(trap, [ca40], config)
    state = integrator.initial_state([CENTER + np.array([1e-6, 0.0, 0.0])])

    # Act
    _, traj = integrator.run(state, config.n_steps, record_every=5)
    f_peak = spectrum_from_trajectory(traj, 0, Axis.X, f_min=1e5, f_max=1e6)

    # Assert
    expected = 0.1 * 10e6 / (2 * np.sqrt(2))
    assert f_peak == pytest.approx(expected, rel=1e-2)
    pseudo = secular_frequencies(trap.secular_field(ca40.charge, ca40.mass), CENTER, ca40)
    assert f_peak == pytest.approx(pseudo.along(Axis.X) / TWO_PI, rel=1e-2)


def test_integrator_rejects_coarse_time_step(ca40: Species):
    omega_rf = TWO_PI * 10e6
    trap = _rf_trap(ca40, q=0.1, omega_rf=omega_rf)
    config = SimConfig(dt=TWO_PI / omega_rf / 10, n_steps=10)

    with pytest.raises(ConfigurationError, match="excede"):
        LangevinIntegrator(trap, [ca40], config)


def test_integrator_rejects_negative_damping(ca40: Species, static_bowl: TimeDependentField):
    config = SimConfig(dt=1e-8, n_steps=10, damping=-1.0)

    with pytest.raises(ConfigurationError, match="no negativo"):
        LangevinIntegrator(static_bowl, [ca40], config)


def test_same_seed_gives_identical_trajectories(ca40: Species, static_bowl: TimeDependentField):
    # Arrange
    gamma = ca40.mass * TWO_PI * 1.0e6
    start = _chain(2)

    def trajectory(seed: int) -> np.ndarray:
        config = SimConfig(dt=2e-8, n_steps=200, damping=gamma, temperature=0.5e-3, rng_seed=seed)
        integrator = LangevinIntegrator(static_bowl, [ca40, ca40], config)
        _, traj = integrator.run(integrator.initial_state(start), config.n_steps)
        return traj.positions

    # Act
    first, second, other = trajectory(11), trajectory(11), trajectory(12)

    # Assert
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_integrator_reports_escaping_ion(ca40: Species):
    # Arrange: sin confinamiento; el ion 1 sale de la caja en el primer paso
    trap = TimeDependentField(ZeroField())
    config = SimConfig(dt=1e-8, n_steps=100, damping=0.0, temperature=0.0, box_half_width=10e-6)
    integrator = LangevinIntegrator(trap, [ca40, ca40], config)
    state = integrator.initial_state(
        [[0.0, 0.0, 15e-6], [5e-6, 0.0, 15e-6]],
        velocities=[[0.0, 0.0, 0.0], [2e3, 0.0, 0.0]],
    )

    # Act
    with pytest.raises(IonLossError) as excinfo:
        integrator.run(state, config.n_steps)

    # Assert
    assert excinfo.value.ion == 1
    assert excinfo.value.time == pytest.approx(1e-8)
    assert excinfo.value.exit_code == 3


def test_integrator_reports_ion_hitting_the_surface(ca40: Species):
    # Arrange: un ion cae sobre los electrodos del diseño real antes de evaluar el campo
    layout = TrapLayout.from_json(LAYOUTS / "twelve_well_ca.json")
    trap = trap_field(layout)
    dt = layout.drive.period / 40
    config = SimConfig(dt=dt, n_steps=10, damping=0.0, temperature=0.0)
    integrator = LangevinIntegrator(trap, [ca40], config)
    state = integrator.initial_state([[0.0, 27e-6, 2e-6]], velocities=[[0.0, 0.0, -1e5]])

    # Act
    with pytest.raises(IonLossError) as excinfo:
        integrator.run(state, config.n_steps)

    # Assert
    assert excinfo.value.ion == 0
    assert excinfo.value.time == pytest.approx(dt)
    assert excinfo.value.exit_code == 3


def test_surface_loss_is_checked_without_box(ca40: Species):
    layout = TrapLayout.from_json(LAYOUTS / "twelve_well_ca.json")
    config = SimConfig(dt=layout.drive.period / 40, n_steps=1, damping=0.0, temperature=0.0)
    integrator = LangevinIntegrator(trap_field(layout), [ca40], config)
    state = integrator.initial_state([[0.0, 27e-6, 2e-6]], velocities=[[0.0, 0.0, -1e5]])

    with pytest.raises(IonLossError):
        integrator.step_verlet(state, check_loss=False)


def test_trajectory_frame_is_long_format(ca40: Species, static_bowl: TimeDependentField):
    config = SimConfig(dt=2e-8, n_steps=10, damping=0.0, temperature=0.0)
    integrator = LangevinIntegrator(static_bowl, [ca40, ca40], config)

    _, traj = integrator.run(integrator.initial_state(_chain(2)), 10, record_every=5)
    frame = traj.to_frame()

    assert list(frame.columns) == ["t", "ion", "x", "y", "z", "vx", "vy", "vz"]
    # Estado inicial más dos muestras, dos iones cada una
    assert len(frame) == 6
    assert frame["ion"].tolist() == [0, 1] * 3


# -- Pruebas para el equilibrio --

@pytest.mark.parametrize("n_ions", [2, 3, 4, 5])
def test_damped_dynamics_match_direct_minimization(ca40: Species, static_bowl: TimeDependentField, n_ions: int):
    # Arrange
    seeds = _chain(n_ions)
    config = SimConfig(dt=2e-8, n_steps=500, settle_steps=2000, temperature=0.0)

    # Act
    result = run_equilibrium(static_bowl, ca40, seeds, config)
    relaxed = relax_crystal(static_bowl, ca40, seeds)

    # Assert
    assert np.max(np.abs(result.positions - relaxed)) < 10e-9
    assert result.residual_amplitude < 1e-9
    assert result.trajectory is not None


def test_two_ion_separation_matches_closed_form(ca40: Species, static_bowl: TimeDependentField):
    omega = TWO_PI * 1.0e6
    length = (K_COULOMB * E_CHARGE**2 / (ca40.mass * omega**2)) ** (1 / 3)

    relaxed = relax_crystal(static_bowl, ca40, _chain(2))

    separation = np.linalg.norm(relaxed[1] - relaxed[0])
    assert separation == pytest.approx(2 ** (1 / 3) * length, rel=1e-6)
    assert relaxed[:, 1:] == pytest.approx(np.tile(CENTER[1:], (2, 1)), abs=1e-12)


def test_seed_positions_center_chains_on_wells(ca40: Species):
    wells = [
        SecularTriple(omega=TWO_PI * np.array([1e6, 5e6, 5e6]), principal_axes=np.eye(3), minimum=CENTER),
        SecularTriple(omega=TWO_PI * np.array([1e6, 5e6, 5e6]), principal_axes=np.eye(3),
                      minimum=CENTER + np.array([100e-6, 0.0, 0.0])),
    ]

    seeds = seed_positions(wells, [2, 0], ca40)

    assert seeds.shape == (2, 3)
    assert seeds.mean(axis=0) == pytest.approx(CENTER)
    assert seeds[1, 0] > seeds[0, 0]


def test_seed_positions_require_one_count_per_well(ca40: Species):
    well = SecularTriple(omega=TWO_PI * np.ones(3) * 1e6, principal_axes=np.eye(3), minimum=CENTER)

    with pytest.raises(ConfigurationError, match="ions_per_well"):
        seed_positions([well, well], [1], ca40)


# -- Pruebas para spectrum_from_trajectory --

def _sampled(signal: np.ndarray, dt: float) -> Trajectory:
    n = len(signal)
    positions = np.zeros((n, 1, 3))
    positions[:, 0, 0] = signal
    return Trajectory(times=np.arange(n) * dt, positions=positions, velocities=np.zeros_like(positions))


def test_spectrum_finds_pure_tone():
    dt = 1e-7
    t = np.arange(4096) * dt

    f = spectrum_from_trajectory(_sampled(1e-6 * np.sin(TWO_PI * 123.4e3 * t), dt), 0, Axis.X)

    assert f == pytest.approx(123.4e3, rel=5e-3)


def test_spectrum_rejects_white_noise():
    rng = np.random.default_rng(5)
    traj = _sampled(rng.normal(0.0, 1e-9, 4096), 1e-7)

    with pytest.raises(AmbiguousSpectrumError, match="piso"):
        spectrum_from_trajectory(traj, 0, Axis.X)


def test_spectrum_rejects_narrow_band():
    traj = _sampled(np.sin(np.arange(256) * 0.3), 1e-7)

    with pytest.raises(AmbiguousSpectrumError, match="menos de 3"):
        spectrum_from_trajectory(traj, 0, Axis.X, f_min=1e5, f_max=1.01e5)
