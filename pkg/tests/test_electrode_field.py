# tests/test_electrode_field.py
from pathlib import Path

import numpy as np
import pytest
from scipy.constants import e as E_CHARGE
from scipy.integrate import dblquad

from iontrap import (
    ConfigurationError,
    DomainError,
    Electrode,
    FitError,
    NotATrapError,
    RfDrive,
    Species,
    TrapLayout,
    anharmonic_fit,
    find_minimum,
    lifetime_estimate,
    pseudopotential,
    rect_potential,
    rf_instantaneous_potential,
    secular_frequencies,
    stability_q,
    total_static_potential,
    trap_depth,
)
from iontrap.context import SecularTriple, WellReport
from iontrap.electrode_field import escape_barriers, rect_gradient, secular_potential
from iontrap.fields import (
    ElectrodeField,
    HarmonicBowl,
    LinearBias,
    PseudopotentialField,
    QuarticDoubleWell,
    RfQuadrupole,
    SumField,
)

LAYOUTS = Path(__file__).resolve().parents[1] / "config" / "layouts"


@pytest.fixture
def ca40() -> Species:
    return Species.from_catalog("Ca40")


@pytest.fixture
def square() -> Electrode:
    return Electrode(id="sq", role="DC_CENTRAL", xa=0.0, ya=0.0, xb=10e-6, yb=10e-6)


@pytest.fixture
def small_layout() -> TrapLayout:
    # Dos electrodos DC disjuntos y un par RF+/RF- simétrico respecto de x = 0
    return TrapLayout(
        name="small",
        drive={"v_rf": 50.0, "omega_rf_hz": 50e6},
        electrodes=[
            {"id": "DC_A", "role": "DC_CENTRAL", "xa": -30e-6, "ya": -5e-6, "xb": -20e-6, "yb": 5e-6},
            {"id": "DC_B", "role": "DC_CENTRAL", "xa": 20e-6, "ya": -5e-6, "xb": 30e-6, "yb": 5e-6},
            {"id": "RF_top", "role": "RF+", "xa": -40e-6, "ya": 10e-6, "xb": 40e-6, "yb": 40e-6},
            {"id": "RF_bottom", "role": "RF-", "xa": -40e-6, "ya": -40e-6, "xb": 40e-6, "yb": -10e-6},
        ],
    )


def _green_integral(bounds, p):
    """Integral numérica de ∂G/∂z del plano conectado a tierra sobre el rectángulo (1 V)."""
    x1, x2, y1, y2 = bounds
    x, y, z = p
    kernel = lambda yp, xp: z / (2 * np.pi) / ((x - xp) ** 2 + (y - yp) ** 2 + z**2) ** 1.5
    return dblquad(kernel, x1, x2, lambda xp: y1, lambda xp: y2, epsabs=0, epsrel=1e-12)[0]


# -- Pruebas para rect_potential --

#* Oráculo de la función de Green
def test_rect_potential_matches_green_function_quadrature(square: Electrode):
    p = (5e-6, 5e-6, 10e-6)

    value = rect_potential(square, 1.0, p)

    assert value == pytest.approx(_green_integral(square.bounds, p), rel=1e-9)


def test_rect_potential_matches_quadrature_at_random_points():
    rng = np.random.default_rng(11)
    for _ in range(5):
        # Arrange
        x = np.sort(rng.uniform(-50e-6, 50e-6, 2))
        y = np.sort(rng.uniform(-50e-6, 50e-6, 2))
        e = Electrode(id="r", role="DC_SIDE", xa=x[0], ya=y[0], xb=x[1], yb=y[1])
        p = (rng.uniform(-60e-6, 60e-6), rng.uniform(-60e-6, 60e-6), rng.uniform(2e-6, 40e-6))

        # Act & Assert
        assert rect_potential(e, 1.0, p) == pytest.approx(_green_integral(e.bounds, p), rel=1e-9)


def test_rect_potential_closed_form_above_center():
    a, z = 5e-6, 10e-6
    e = Electrode(id="c", role="DC_CENTRAL", xa=-a, ya=-a, xb=a, yb=a)

    value = rect_potential(e, 2.0, (0.0, 0.0, z))

    expected = 2.0 * (2 / np.pi) * np.arctan(a**2 / (z * np.sqrt(2 * a**2 + z**2)))
    assert value == pytest.approx(expected, rel=1e-12)


def test_rect_potential_tends_to_voltage_near_surface(square: Electrode):
    assert rect_potential(square, 3.0, (5e-6, 5e-6, 1e-10)) == pytest.approx(3.0, rel=1e-4)
    assert rect_potential(square, 0.0, (5e-6, 5e-6, 5e-6)) == 0.0


def test_rect_potential_rejects_points_on_the_plane(square: Electrode):
    with pytest.raises(DomainError, match="z > 0"):
        rect_potential(square, 1.0, (5e-6, 5e-6, 0.0))


def test_rect_gradient_matches_central_differences():
    rng = np.random.default_rng(5)
    e = Electrode(id="g", role="DC_CENTRAL", xa=-8e-6, ya=-3e-6, xb=12e-6, yb=9e-6)
    h = 1e-10
    for _ in range(10):
        p = np.array([rng.uniform(-30e-6, 30e-6), rng.uniform(-30e-6, 30e-6), rng.uniform(1e-6, 30e-6)])

        grad = rect_gradient(e, 1.0, p)

        fd = np.array([
            (rect_potential(e, 1.0, p + h * d) - rect_potential(e, 1.0, p - h * d)) / (2 * h)
            for d in np.eye(3)
        ])
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-7 * np.linalg.norm(fd))


def test_electrode_field_satisfies_laplace_equation():
    field = ElectrodeField([(-8e-6, 12e-6, -3e-6, 9e-6), (15e-6, 25e-6, -10e-6, 10e-6)], [1.0, -2.5])
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = np.array([rng.uniform(-20e-6, 30e-6), rng.uniform(-20e-6, 20e-6), rng.uniform(3e-6, 30e-6)])

        hess = field.hessian(p)

        assert abs(np.trace(hess)) < 1e-5 * np.max(np.abs(np.linalg.eigvalsh(hess)))


# -- Pruebas para la superposición --

def test_total_static_potential_is_superposition(small_layout: TrapLayout):
    p = (3e-6, -2e-6, 15e-6)
    dc_a, dc_b = small_layout.dc_electrodes

    both = total_static_potential(small_layout, [1.0, 2.0], p)

    expected = rect_potential(dc_a, 1.0, p) + rect_potential(dc_b, 2.0, p)
    assert both == pytest.approx(expected, rel=1e-14)
    assert total_static_potential(small_layout, None, p) == 0.0


def test_total_static_potential_rejects_wrong_length(small_layout: TrapLayout):
    with pytest.raises(ConfigurationError, match="voltajes DC"):
        total_static_potential(small_layout, [1.0, 2.0, 3.0], (0.0, 0.0, 10e-6))


def test_dc_mapping_rejects_unknown_electrode(small_layout: TrapLayout):
    with pytest.raises(ConfigurationError, match="desconocidos"):
        total_static_potential(small_layout, {"DC_Z": 1.0}, (0.0, 0.0, 10e-6))


def test_rf_potential_changes_sign_after_half_period(small_layout: TrapLayout):
    drive = small_layout.drive
    p = (1e-6, 4e-6, 12e-6)

    at_zero = rf_instantaneous_potential(small_layout, drive, 0.0, p)
    half = rf_instantaneous_potential(small_layout, drive, np.pi / drive.omega_rf, p)
    quarter = rf_instantaneous_potential(small_layout, drive, np.pi / (2 * drive.omega_rf), p)

    assert half == pytest.approx(-at_zero, rel=1e-12)
    assert abs(quarter) < 1e-12 * abs(at_zero)


def test_layout_rejects_overlapping_electrodes():
    with pytest.raises(ValueError, match="se superponen"):
        TrapLayout(
            drive={"v_rf": 50.0, "omega_rf_hz": 50e6},
            electrodes=[
                {"id": "a", "role": "DC_CENTRAL", "xa": 0, "ya": 0, "xb": 2e-6, "yb": 2e-6},
                {"id": "b", "role": "DC_CENTRAL", "xa": 1e-6, "ya": 1e-6, "xb": 3e-6, "yb": 3e-6},
            ],
        )


# -- Pruebas para el pseudopotencial --

def test_pseudopotential_scaling(small_layout: TrapLayout, ca40: Species):
    p = (2e-6, 1e-6, 15e-6)
    drive = small_layout.drive
    base = pseudopotential(small_layout, drive, ca40, p)

    doubled = pseudopotential(small_layout, RfDrive(v_rf=2 * drive.v_rf, omega_rf=drive.omega_rf), ca40, p)
    scaled = pseudopotential(small_layout, RfDrive(v_rf=3 * drive.v_rf, omega_rf=3 * drive.omega_rf), ca40, p)

    assert base > 0
    assert doubled == pytest.approx(4 * base, rel=1e-12)
    assert scaled == pytest.approx(base, rel=1e-12)


def test_pseudopotential_of_linear_quadrupole_is_closed_form(ca40: Species):
    kappa, omega_rf = 1e8, 2 * np.pi * 20e6
    rf = RfQuadrupole(kappa)

    field = PseudopotentialField(rf, ca40.charge, ca40.mass, omega_rf)
    p = np.array([3e-6, -4e-6, 10e-6])

    gradient_norm = kappa * np.hypot(3e-6, 4e-6)
    assert field.value(p) == pytest.approx(E_CHARGE * gradient_norm**2 / (4 * ca40.mass * omega_rf**2), rel=1e-12)
    assert field.value(np.zeros(3)) == 0.0


def test_layout_pseudopotential_is_mirror_symmetric(ca40: Species):
    layout = TrapLayout.from_json(LAYOUTS / "twelve_well_ca.json")
    p = np.array([23e-6, 4e-6, 18e-6])

    left = pseudopotential(layout, layout.drive, ca40, p * np.array([-1, 1, 1]))
    right = pseudopotential(layout, layout.drive, ca40, p)

    assert left == pytest.approx(right, rel=1e-10)


# -- Pruebas para mínimos y frecuencias --

def test_find_minimum_of_harmonic_bowl(ca40: Species):
    center = np.array([1e-6, -2e-6, 20e-6])
    bowl = HarmonicBowl(center, [1e7, 4e7, 9e7])

    minimum = find_minimum(bowl, center + np.array([3e-6, 1e-6, -2e-6]))
    triple = secular_frequencies(bowl, minimum, ca40)

    assert minimum == pytest.approx(center, abs=1e-15)
    expected = np.sqrt(E_CHARGE * np.array([1e7, 4e7, 9e7]) / ca40.mass)
    assert triple.omega == pytest.approx(expected, rel=1e-12)
    assert np.allclose(triple.principal_axes.T @ triple.principal_axes, np.eye(3), atol=1e-10)
    assert triple.axis_labels() == ["x", "y", "z"]


def test_find_minimum_of_biased_bowl():
    # Cuenco desplazado más un campo lineal: mínimo en c - K⁻¹ g
    center = np.array([0.0, 0.0, 25e-6])
    K = np.array([2e7, 3e7, 5e7])
    g = np.array([10.0, -6.0, 20.0])
    field = SumField(HarmonicBowl(center, K), LinearBias(g))

    minimum = find_minimum(field, center)

    assert minimum == pytest.approx(center - g / K, rel=1e-10)


def test_secular_frequencies_reports_escape_direction(ca40: Species):
    saddle = HarmonicBowl([0.0, 0.0, 20e-6], [1e7, 1e7, -1e7])

    with pytest.raises(NotATrapError) as excinfo:
        secular_frequencies(saddle, [0.0, 0.0, 20e-6], ca40)

    assert abs(excinfo.value.escape_direction[2]) == pytest.approx(1.0)


def test_example_layout_traps_near_twenty_microns(ca40: Species):
    # Arrange
    layout = TrapLayout.from_json(LAYOUTS / "twelve_well_ca.json")
    field = secular_potential(layout, layout.drive, ca40)
    guess = layout.well_guesses()[5]

    # Act
    minimum = find_minimum(field, guess)
    triple = secular_frequencies(field, minimum, ca40)

    # Assert: la reconstrucción del diseño es aproximada
    assert 10e-6 < minimum[2] < 30e-6
    assert abs(minimum[0] - guess[0]) < 14e-6
    assert np.all(triple.omega > 0)


# -- Pruebas para profundidad y métricas --

def test_depth_of_isolated_bowl_is_bounded_by_box():
    bowl = HarmonicBowl([0.0, 0.0, 20e-6], [1e9, 1e9, 1e9])

    barriers = escape_barriers(bowl, [0.0, 0.0, 20e-6], box_height=100e-6)
    depth = trap_depth(bowl, [0.0, 0.0, 20e-6], box_height=100e-6)

    assert barriers["bounded"]
    assert barriers["interwell"] is None
    assert depth == pytest.approx(0.5 * 1e9 * (80e-6) ** 2 * 1e3, rel=1e-9)


def test_depth_of_quartic_double_well_matches_barrier():
    # Mínimos en x = ±5 μm y barrera b²/4a = 0.1 V
    well = QuarticDoubleWell(a=1.6e20, b=8e9, c_perp=1e9, center=(0.0, 0.0, 20e-6))
    left, right = well.minima

    barriers = escape_barriers(well, left, neighbors=[right], box_height=100e-6)
    depth = trap_depth(well, left, neighbors=[right], box_height=100e-6)

    assert barriers["interwell"] == pytest.approx(well.barrier, rel=1e-6)
    assert depth == pytest.approx(100.0, rel=1e-6)


def test_escape_barriers_require_box_above_minimum():
    bowl = HarmonicBowl([0.0, 0.0, 20e-6], [1e9, 1e9, 1e9])

    with pytest.raises(ConfigurationError, match="altura de la caja"):
        escape_barriers(bowl, [0.0, 0.0, 20e-6], box_height=10e-6)


def test_stability_q_boundary_and_example():
    omega_rf = 2 * np.pi * 110e6

    q_ca, stable_ca = stability_q(2 * np.pi * 28.34e6, omega_rf)
    q_over, stable_over = stability_q(omega_rf / (2 * np.sqrt(2)) * 0.9081, omega_rf)
    q_under, stable_under = stability_q(omega_rf / (2 * np.sqrt(2)) * 0.9079, omega_rf)
    q_zero, stable_zero = stability_q(0.0, RfDrive(v_rf=80.0, omega_rf=omega_rf))

    assert q_ca == pytest.approx(0.729, abs=1e-3)
    assert stable_ca
    assert q_over == pytest.approx(0.9081)
    assert not stable_over
    assert stable_under
    assert q_zero == 0.0 and stable_zero


def test_lifetime_estimate_defaults_and_scaling():
    tau = lifetime_estimate()

    assert 30 * 60 < tau < 42 * 60
    assert lifetime_estimate(pressure=2 * 7.5e-10) == pytest.approx(tau / 2)
    assert lifetime_estimate(temperature=4 * 300.0) == pytest.approx(2 * tau)


def test_lifetime_estimate_rejects_non_positive_inputs():
    with pytest.raises(ConfigurationError, match="positivos"):
        lifetime_estimate(pressure=0.0)


def test_well_row_labels_frequencies_by_cartesian_axis():
    # Arrange: autovalores ordenados como (z, x, y)
    axes = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    triple = SecularTriple(omega=2 * np.pi * np.array([1.0e6, 2.0e6, 3.0e6]), principal_axes=axes,
                           minimum=np.array([0.0, 0.0, 20e-6]))
    report = WellReport(index=0, secular=triple, depth_mev=10.0, depth_bounded_by_box=False,
                        q=0.2, stable=True, anisotropy=0.1, linear_crystal=True)

    # Act
    row = report.as_row()

    # Assert
    assert row["fx_hz"] == pytest.approx(2.0e6)
    assert row["fy_hz"] == pytest.approx(3.0e6)
    assert row["fz_hz"] == pytest.approx(1.0e6)
    assert "f1_hz" not in row


# -- Pruebas para anharmonic_fit --

def test_anharmonic_fit_recovers_quartic_coefficients():
    # φ = κ4 x⁴ + κ2 x² a lo largo de x
    kappa2, kappa4 = 1e9, 1e20
    well = QuarticDoubleWell(a=kappa4, b=-kappa2, c_perp=1e9, center=(0.0, 0.0, 20e-6))

    fit = anharmonic_fit(well, [0.0, 0.0, 20e-6], window=2e-6)

    assert fit.kappa2 == pytest.approx(kappa2, rel=1e-8)
    assert fit.kappa4 == pytest.approx(kappa4, rel=1e-8)
    assert fit.kappa3 == 0.0
    assert fit.lambda3 is None
    assert fit.lambda4 == pytest.approx(np.sqrt(kappa2 / kappa4), rel=1e-8)
    assert fit.alpha == pytest.approx(fit.char_length**2 * kappa4 / kappa2, rel=1e-8)


def test_anharmonic_fit_of_pure_quadratic_has_no_quartic_scale():
    bowl = HarmonicBowl([0.0, 0.0, 20e-6], [2e9, 3e9, 4e9])

    fit = anharmonic_fit(bowl, [0.0, 0.0, 20e-6], window=1e-6)

    assert fit.kappa2 == pytest.approx(1e9, rel=1e-8)
    assert fit.lambda4 is None
    assert fit.alpha == 0.0


def test_anharmonic_fit_rejects_local_maximum():
    well = QuarticDoubleWell(a=1.6e20, b=8e9, c_perp=1e9, center=(0.0, 0.0, 20e-6))

    with pytest.raises(FitError, match="κ2 no positivo"):
        anharmonic_fit(well, [0.0, 0.0, 20e-6], window=1e-6, direction=[1.0, 0.0, 0.0])
