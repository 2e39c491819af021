# tests/test_voltage_optimizer.py
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from iontrap import (
    AffineFrequencyModel,
    Axis,
    ConfigurationError,
    InfeasibleVoltageError,
    LayoutFrequencyModel,
    OptimizerConfig,
    Species,
    TrapLayout,
    optimize,
)
from iontrap.context import AdamState, TargetSpectrum
from iontrap.voltage_optimizer import (
    adam_step,
    all_to_all_targets,
    explicit_targets,
    gradient,
    loss,
    max_site_error_hz,
    pinned_pair_targets,
    sensitivity_report,
)

TWO_PI = 2 * np.pi
OMEGA0 = TWO_PI * 1.0e6
# dω/dV = 2π·100 kHz/V alrededor de ω0
SLOPE = 2 * OMEGA0 * TWO_PI * 1.0e5
LAYOUTS = Path(__file__).resolve().parents[1] / "config" / "layouts"


@pytest.fixture
def ca40() -> Species:
    return Species.from_catalog("Ca40")


@pytest.fixture
def toy_model() -> AffineFrequencyModel:
    # Dos sitios y dos electrodos con acoplamiento cruzado
    B = SLOPE * np.array([[1.0, 0.3], [0.2, 1.0]])
    return AffineFrequencyModel(a=[OMEGA0**2, OMEGA0**2], B=B, lower=[-10, -10], upper=[10, 10])


def _targets_at(model: AffineFrequencyModel, voltages) -> TargetSpectrum:
    omega, _ = model.evaluate(np.asarray(voltages, dtype=float))
    return TargetSpectrum(omega=omega[:, 2].tolist(), axis="z")


# -- Pruebas para los objetivos --

def test_explicit_targets_convert_hz_to_rad_per_second():
    targets = explicit_targets([1.0e6, 2.0e6], axis="x")

    assert targets.axis is Axis.X
    assert targets.omega == pytest.approx([TWO_PI * 1.0e6, TWO_PI * 2.0e6])
    assert targets.weights == [1.0, 1.0]


def test_all_to_all_targets_use_current_mean():
    omega = np.array([[1.0, 2.0, 10.0], [1.0, 2.0, 20.0], [1.0, 2.0, 30.0]])

    targets = all_to_all_targets(omega, Axis.Z)

    assert targets.omega == [20.0, 20.0, 20.0]


def test_pinned_pair_targets_offset_from_rest():
    omega = np.zeros((4, 3))
    omega[:, 2] = TWO_PI * np.array([1.0e6, 1.1e6, 1.2e6, 1.3e6])

    targets = pinned_pair_targets(omega, pinned=[1, 2], offset_hz=5.0e4, axis=Axis.Z)

    hz = np.asarray(targets.omega) / TWO_PI
    assert hz[0] == pytest.approx(1.15e6)
    assert hz[3] == pytest.approx(1.15e6)
    assert hz[1] == hz[2] == pytest.approx(1.2e6)


def test_pinned_pair_targets_require_remaining_sites():
    with pytest.raises(ConfigurationError, match="sitios restantes"):
        pinned_pair_targets(np.ones((2, 3)), pinned=[0, 1], offset_hz=1.0)


def test_target_spectrum_rejects_mismatched_weights():
    with pytest.raises(ValueError, match="misma longitud"):
        TargetSpectrum(omega=[1.0, 2.0], weights=[1.0])


# -- Pruebas para la pérdida y el gradiente --

def test_loss_is_zero_at_target(toy_model: AffineFrequencyModel):
    targets = _targets_at(toy_model, [1.0, 2.0])

    value, omega, _ = loss([1.0, 2.0], targets, toy_model)

    assert value == pytest.approx(0.0, abs=1e-12)
    assert max_site_error_hz(omega, targets) < 1e-6


def test_max_site_error_ignores_zero_weight_sites(toy_model: AffineFrequencyModel):
    omega, _ = toy_model.evaluate(np.zeros(2))
    targets = TargetSpectrum(omega=[OMEGA0, OMEGA0 + TWO_PI * 500.0], axis="z", weights=[1.0, 0.0])

    assert max_site_error_hz(omega, targets) == pytest.approx(0.0, abs=1e-6)


def test_gradient_matches_analytic_derivative(toy_model: AffineFrequencyModel):
    # Arrange
    targets = _targets_at(toy_model, [1.0, 2.0])
    v = np.array([1.2, 1.7])

    # Act
    grad = gradient(v, targets, toy_model, threads=2)

    # Assert: d/dV Σ (f - f*)² con f = sqrt(a + B V) / 2π
    omega2 = toy_model.a + toy_model.B @ v
    f = np.sqrt(omega2) / TWO_PI
    df_dv = toy_model.B / (2 * np.sqrt(omega2)[:, None] * TWO_PI)
    f_star = np.asarray(targets.omega) / TWO_PI
    expected = 2 * (f - f_star) @ df_dv
    assert grad == pytest.approx(expected, rel=1e-5)


def test_gradient_falls_back_to_one_sided_difference():
    # ω² = 1 - V: la sonda positiva deja el sitio sin confinamiento
    model = AffineFrequencyModel(a=[1.0], B=[[-1.0]])
    targets = TargetSpectrum(omega=[0.01], axis="z")
    v = np.array([0.9995])
    step = 1e-3

    grad = gradient(v, targets, model, step=step)

    base = loss(v, targets, model)[0]
    minus = loss(v - step, targets, model)[0]
    assert grad[0] == pytest.approx((base - minus) / step)


def test_affine_model_raises_when_site_loses_confinement():
    model = AffineFrequencyModel(a=[1.0, 1.0], B=[[0.0], [-1.0]])

    with pytest.raises(InfeasibleVoltageError) as excinfo:
        model.evaluate(np.array([2.0]))

    assert excinfo.value.site == 1


#* Adam
def test_adam_first_step_moves_by_learning_rate():
    state = AdamState.zeros(2, learning_rate=0.01)

    new_state, v = adam_step(state, np.array([3.0, -0.5]), np.array([1.0, 1.0]))

    # Con la corrección de sesgo el primer paso vale lr·signo(g)
    assert new_state.step == 1
    assert v == pytest.approx([0.99, 1.01], abs=1e-8)


def test_adam_step_projects_onto_bounds():
    state = AdamState.zeros(1, learning_rate=0.5)

    _, v = adam_step(state, np.array([-1.0]), np.array([5.8]), lower=[0.0], upper=[6.0])

    assert v[0] == 6.0


# -- Pruebas para optimize --

def test_optimize_recovers_toy_optimum(toy_model: AffineFrequencyModel):
    # Arrange
    v_star = np.array([1.0, 2.0])
    targets = _targets_at(toy_model, v_star)
    config = OptimizerConfig(learning_rate=0.01, max_iter=5000, tol_hz=10.0, stall_window=200)

    # Act
    result = optimize(toy_model, targets, v_star + np.array([0.3, -0.3]), config)

    # Assert
    assert result.converged
    assert not result.stalled
    assert np.max(np.abs(result.voltages - v_star)) < 1e-3
    assert result.flags["bounds_ok"]
    assert result.loss_history[-1] < result.loss_history[0]


def test_optimize_matches_golden_section_on_single_electrode():
    # Arrange: un electrodo no puede satisfacer los dos sitios; el óptimo es un compromiso
    model = AffineFrequencyModel(a=[OMEGA0**2, OMEGA0**2], B=SLOPE * np.array([[1.0], [2.0]]))
    targets = TargetSpectrum(omega=[OMEGA0 + TWO_PI * 1.0e5, OMEGA0 + TWO_PI * 1.0e5], axis="z")
    config = OptimizerConfig(learning_rate=0.01, max_iter=3000, tol_hz=1e-3, stall_window=200)

    # Act
    result = optimize(model, targets, [0.0], config)
    golden = minimize_scalar(
        lambda x: loss([x], targets, model)[0], bracket=(0.0, 0.5, 1.0), method="golden", tol=1e-10,
    )

    # Assert
    assert not result.converged
    assert result.voltages[0] == pytest.approx(golden.x, abs=1e-3)


def test_optimize_flags_stall_on_flat_loss():
    # B = 0: ningún voltaje cambia las frecuencias
    model = AffineFrequencyModel(a=[OMEGA0**2], B=[[0.0]])
    targets = TargetSpectrum(omega=[OMEGA0 + TWO_PI * 1.0e3], axis="z")
    config = OptimizerConfig(max_iter=100, stall_window=5)

    result = optimize(model, targets, [0.5], config)

    assert result.stalled
    assert not result.converged
    assert len(result.loss_history) == 6


def test_optimize_clips_start_to_bounds():
    model = AffineFrequencyModel(a=[OMEGA0**2], B=[[SLOPE]], lower=[0.0], upper=[6.0])
    targets = TargetSpectrum(omega=[OMEGA0], axis="z")

    result = optimize(model, targets, [9.0], OptimizerConfig(max_iter=1, stall_window=5))

    # El arranque se proyecta a las cotas, así que nunca quedan violaciones
    assert result.iterations[0]["voltages"] == [6.0]
    assert result.bound_violations == []


def test_layout_all_to_all_run_converges_or_stalls(ca40: Species):
    # Arrange: pozos 4 y 5 del diseño de calcio, llevados a la misma frecuencia vertical
    layout = TrapLayout.from_json(LAYOUTS / "twelve_well_ca.json")
    model = LayoutFrequencyModel(layout, layout.drive, ca40, free_ids=["DC_C4", "DC_C5"],
                                 guesses=layout.well_guesses()[[4, 5]])
    initial = model.free_voltages()
    omega0, _ = model.evaluate(initial)
    targets = all_to_all_targets(omega0, Axis.Z)
    config = OptimizerConfig(learning_rate=0.01, max_iter=600, tol_hz=10.0, stall_window=10, stall_rtol=0.5)

    # Act
    result = optimize(model, targets, initial, config)

    # Assert
    error = max_site_error_hz(result.site_frequencies, targets)
    assert result.converged or result.stalled
    if result.converged:
        assert error < 10.0
    assert result.flags["bounds_ok"]


# -- Pruebas para sensitivity_report --

def test_sensitivity_report_on_affine_model(toy_model: AffineFrequencyModel):
    frame = sensitivity_report(toy_model, delta=6.0, threads=2)

    assert list(frame.columns) == ["electrode", "site", "dwx_pct", "dwy_pct", "dwz_pct", "feasible"]
    assert len(frame) == 4
    row = frame[(frame["electrode"] == "E1") & (frame["site"] == 0)].iloc[0]
    expected = 100 * (np.sqrt(OMEGA0**2 + 6.0 * toy_model.B[0, 1]) - OMEGA0) / OMEGA0
    assert row["dwz_pct"] == pytest.approx(expected)
    assert frame["feasible"].all()


def test_sensitivity_report_marks_infeasible_shift():
    model = AffineFrequencyModel(a=[1.0], B=[[-1.0]], electrode_ids=["DC_C0"])

    frame = sensitivity_report(model, delta=6.0)

    assert not frame.loc[0, "feasible"]
    assert np.isnan(frame.loc[0, "dwz_pct"])
