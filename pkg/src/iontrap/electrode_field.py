"""
Potenciales de electrodos rectangulares, pseudopotencial y métricas de la trampa.

Este módulo construye los campos de una trampa superficial a partir de un
TrapLayout (superposición de rectángulos sobre un plano sin huecos), localiza
los mínimos de atrapamiento y calcula frecuencias seculares, profundidad,
parámetro q de estabilidad, vida media y el ajuste anarmónico axial.
"""

from typing import Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy import constants
from scipy.optimize import minimize, minimize_scalar

from .context import (
    AMU,
    Electrode,
    RfDrive,
    TrapLayout,
    Species,
    SecularTriple,
    AnharmonicFit,
    WellReport,
)
from .context.Models import SliceGrid
from .fields import (
    ScalarField,
    ElectrodeField,
    PseudopotentialField,
    TrapPotentialField,
    TimeDependentField,
)
from .iontrap_exceptions import (
    ConfigurationError,
    DomainError,
    SearchError,
    NotATrapError,
    FitError,
)

E_CHARGE = constants.e
EPS0 = constants.epsilon_0
K_B = constants.k
Q_STABILITY_LIMIT = 0.908

# Vacío de referencia para la vida media: da ~36 min con H2 a 300 K
LIFETIME_PRESSURE = 7.5e-10
LIFETIME_CROSS_SECTION = 1e-18
LIFETIME_BG_MASS = 2.01588 * AMU
LIFETIME_TEMPERATURE = 300.0

DcVoltages = Union[None, np.ndarray, list, dict]


# -- Potencial de un rectángulo --

def rect_potential(e: Electrode, v: float, p) -> float:
    """Potencial (V) en p de un electrodo rectangular a voltaje v sobre un plano conectado a tierra."""
    return float(ElectrodeField([e.bounds], [v]).value(p))


def rect_gradient(e: Electrode, v: float, p) -> np.ndarray:
    """Gradiente analítico (V/m) del potencial de un electrodo rectangular."""
    return ElectrodeField([e.bounds], [v]).gradient(p)


# -- Superposición --

def _dc_array(layout: TrapLayout, dc_voltages: DcVoltages) -> np.ndarray:
    if dc_voltages is None:
        return np.zeros(len(layout.dc_electrodes))
    if isinstance(dc_voltages, dict):
        return layout.dc_vector(dc_voltages)
    values = np.asarray(dc_voltages, dtype=float).reshape(-1)
    if len(values) != len(layout.dc_electrodes):
        raise ConfigurationError(
            f"Se esperaban {len(layout.dc_electrodes)} voltajes DC y se recibieron {len(values)}"
        )
    return values


def dc_field(layout: TrapLayout, dc_voltages: DcVoltages = None) -> ElectrodeField:
    """Campo estático de los electrodos DC con el vector (o mapeo) de voltajes dado."""
    values = _dc_array(layout, dc_voltages)
    return ElectrodeField([e.bounds for e in layout.dc_electrodes], values)


def rf_amplitude_field(layout: TrapLayout, drive: Optional[RfDrive] = None) -> ElectrodeField:
    """Amplitud del potencial de RF: RF+ a +v_rf y RF- a -v_rf (fase π)."""
    drive = drive or layout.drive
    rf = layout.rf_electrodes
    return ElectrodeField([e.bounds for e in rf], [drive.amplitude(e.role) for e in rf])


def trap_field(layout: TrapLayout, drive: Optional[RfDrive] = None,
               dc_voltages: DcVoltages = None) -> TimeDependentField:
    """Potencial total dependiente del tiempo φ_DC(p) + φ_RF(p)·cos(Ωt)."""
    drive = drive or layout.drive
    rf = rf_amplitude_field(layout, drive) if layout.rf_electrodes else None
    return TimeDependentField(dc_field(layout, dc_voltages), rf, drive.omega_rf)


def total_static_potential(layout: TrapLayout, dc_voltages: DcVoltages, p) -> float:
    """Suma de los potenciales de los electrodos DC en p."""
    return dc_field(layout, dc_voltages).value(p)


def rf_instantaneous_potential(layout: TrapLayout, drive: RfDrive, t: float, p) -> float:
    """Potencial de RF en el instante t: ±v_rf·cos(Ωt) por electrodo según su fase."""
    return rf_amplitude_field(layout, drive).value(p) * float(np.cos(drive.omega_rf * t))


def pseudopotential_field(layout: TrapLayout, drive: RfDrive, sp: Species) -> PseudopotentialField:
    return PseudopotentialField(rf_amplitude_field(layout, drive), sp.charge, sp.mass, drive.omega_rf)


def pseudopotential(layout: TrapLayout, drive: RfDrive, sp: Species, p) -> float:
    """Pseudopotencial en eV: Z² e |∇φ_RF|² / (4 m Ω²)."""
    return pseudopotential_field(layout, drive, sp).value(p)


def secular_potential(layout: TrapLayout, drive: Optional[RfDrive], sp: Species,
                      dc_voltages: DcVoltages = None) -> TrapPotentialField:
    """Potencial promediado (volts) que confina a un ion de la especie dada."""
    return trap_field(layout, drive, dc_voltages).secular_field(sp.charge, sp.mass)


# -- Mínimos y frecuencias --

def _trust_region(field: ScalarField, p: np.ndarray, length: float) -> np.ndarray:
    """Búsqueda de respaldo con región de confianza en coordenadas escaladas."""
    logger.debug(f"Hessiano indefinido en {p}, se usa región de confianza")
    try:
        res = minimize(
            lambda u: field.value(u * length),
            p / length,
            jac=lambda u: field.gradient(u * length) * length,
            hess=lambda u: field.hessian(u * length) * length**2,
            method="trust-exact",
            options={"maxiter": 200, "gtol": 1e-12},
        )
    except DomainError as e:
        raise SearchError("La búsqueda del mínimo salió del dominio z > 0") from e
    return res.x * length


def find_minimum(field: ScalarField, guess, max_iter: int = 100, tol: float = 1e-12) -> np.ndarray:
    """
    Localiza un mínimo del campo con Newton amortiguado y respaldo de región de confianza.

    La convergencia se declara cuando |∇φ| < tol·λ_max·L, con L = max(|z|, 1 μm),
    o cuando el paso de Newton es menor que la resolución de punto flotante.

    Raises:
        SearchError: si no converge o si el punto final es un punto de silla.
    """
    p = np.asarray(guess, dtype=float).copy()
    length = max(abs(p[2]), 1e-6)
    grad_norm = np.inf
    scale = 1.0
    for iteration in range(max_iter):
        grad = field.gradient(p)
        hess = field.hessian(p)
        eig = np.linalg.eigvalsh(hess)
        scale = max(float(np.max(np.abs(eig))), 1e-300) * length
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol * scale:
            break
        if eig[0] <= 0:
            p = _trust_region(field, p, length)
            continue

        step = -np.linalg.solve(hess, grad)
        if np.linalg.norm(step) < 1e-15 * max(np.linalg.norm(p), length):
            break
        f0 = field.value(p)
        t = 1.0
        while True:
            trial = p + t * step
            try:
                accepted = np.linalg.norm(t * step) < 1e-3 * length or field.value(trial) <= f0
            except DomainError:
                accepted = False
            if accepted or t < 1e-8:
                break
            t *= 0.5
        p = trial
    else:
        logger.debug(f"Se agotaron {max_iter} iteraciones con |∇φ|={grad_norm:.3e} V/m")

    eig = np.linalg.eigvalsh(field.hessian(p))
    if eig[0] <= 0:
        raise SearchError(f"Punto de silla detectado en {p}", hessian_eigenvalues=eig)
    grad_norm = float(np.linalg.norm(field.gradient(p)))
    if grad_norm > 1e-6 * scale:
        raise SearchError(
            f"La búsqueda del mínimo no convergió en {max_iter} iteraciones (|∇φ|={grad_norm:.3e} V/m)",
            hessian_eigenvalues=eig,
        )
    logger.debug(f"Mínimo encontrado en {p} tras {iteration + 1} iteraciones")
    return p


def _canonical_axes(vectors: np.ndarray) -> np.ndarray:
    """Fija el signo de cada columna para que su componente de mayor magnitud sea positiva."""
    vectors = vectors.copy()
    for k in range(vectors.shape[1]):
        if vectors[np.argmax(np.abs(vectors[:, k])), k] < 0:
            vectors[:, k] *= -1
    return vectors


def secular_frequencies(field: ScalarField, minimum, sp: Species) -> SecularTriple:
    """
    Frecuencias seculares ω_k = sqrt(Z e λ_k / m) a partir de los autovalores
    λ_k del Hessiano del potencial (volts) en el mínimo.

    Raises:
        NotATrapError: si algún autovalor es no positivo.
    """
    minimum = np.asarray(minimum, dtype=float)
    eig, vectors = np.linalg.eigh(field.hessian(minimum))
    if eig[0] <= 0:
        raise NotATrapError(
            f"El Hessiano en {minimum} tiene un autovalor no positivo ({eig[0]:.3e} V/m²)",
            escape_direction=vectors[:, 0],
        )
    omega = np.sqrt(sp.charge * E_CHARGE * eig / sp.mass)
    return SecularTriple(omega=omega, principal_axes=_canonical_axes(vectors), minimum=minimum)


# -- Profundidad --

def _relaxed_value(field: ScalarField, xy: np.ndarray, z_bounds: tuple[float, float]) -> float:
    res = minimize_scalar(
        lambda z: field.value(np.array([xy[0], xy[1], z])),
        bounds=z_bounds,
        method="bounded",
        options={"xatol": 1e-4 * z_bounds[1]},
    )
    return float(res.fun)


def _interwell_barrier(field: ScalarField, a: np.ndarray, b: np.ndarray, n: int = 41) -> float:
    """Máximo a lo largo del segmento a -> b del potencial relajado en z, medido desde a."""
    zc = 0.5 * (a[2] + b[2])
    z_bounds = (0.5 * zc, 1.5 * zc)
    path = lambda s: _relaxed_value(field, a[:2] + s * (b[:2] - a[:2]), z_bounds)
    s_grid = np.linspace(0.0, 1.0, n)
    values = np.array([path(s) for s in s_grid])
    k = int(np.argmax(values))
    v0 = field.value(a)
    if k == 0:
        return 0.0
    if k == n - 1:
        return float(values[-1] - v0)
    res = minimize_scalar(lambda s: -path(s), bounds=(s_grid[k - 1], s_grid[k + 1]),
                          method="bounded", options={"xatol": 1e-6})
    return float(max(-res.fun, values[k]) - v0)


def _vertical_barrier(field: ScalarField, minimum: np.ndarray, box_height: float,
                      n: int = 200) -> tuple[float, bool]:
    """Barrera hacia z -> ∞ sobre la vertical del mínimo; indica si la acota el borde de la caja."""
    if box_height <= minimum[2]:
        raise ConfigurationError("La altura de la caja debe superar la altura del mínimo")
    zs = np.linspace(minimum[2], box_height, n)
    points = np.column_stack([np.full(n, minimum[0]), np.full(n, minimum[1]), zs])
    values = field.values(points)
    v0 = field.value(minimum)
    k = int(np.argmax(values))
    if k == n - 1:
        return float(values[-1] - v0), True
    if k == 0:
        return 0.0, False
    line = lambda z: field.value(np.array([minimum[0], minimum[1], z]))
    res = minimize_scalar(lambda z: -line(z), bounds=(zs[k - 1], zs[k + 1]), method="bounded",
                          options={"xatol": 1e-6 * box_height})
    return float(max(-res.fun, values[k]) - v0), False


def escape_barriers(field: ScalarField, minimum, neighbors=None, box_height: float = 100e-6) -> dict:
    """
    Barreras de escape (volts) desde un mínimo hacia los pozos vecinos y hacia arriba.

    Returns:
        Diccionario con 'interwell' (None si no hay vecinos), 'vertical' y
        'bounded' (True si la barrera vertical la fija el borde de la caja).
    """
    minimum = np.asarray(minimum, dtype=float)
    interwell = None
    for nb in neighbors if neighbors is not None else []:
        barrier = _interwell_barrier(field, minimum, np.asarray(nb, dtype=float))
        interwell = barrier if interwell is None else min(interwell, barrier)
    vertical, bounded = _vertical_barrier(field, minimum, box_height)
    return {"interwell": interwell, "vertical": vertical, "bounded": bounded}


def trap_depth(field: ScalarField, minimum, charge: int = 1, neighbors=None,
               box_height: float = 100e-6) -> float:
    """
    Profundidad de la trampa en meV: la menor barrera de escape por Z.

    Si la barrera vertical no tiene máximo dentro de la caja se usa el valor en el borde
    y se emite una advertencia.
    """
    barriers = escape_barriers(field, minimum, neighbors, box_height)
    candidates = [barriers["vertical"]]
    if barriers["interwell"] is not None:
        candidates.append(barriers["interwell"])
    depth = min(candidates) * charge * 1e3
    if barriers["bounded"] and depth == barriers["vertical"] * charge * 1e3:
        logger.warning(f"La profundidad en {np.asarray(minimum)} está acotada por el borde de la caja ({box_height:.2e} m)")
    return float(depth)


# -- Métricas escalares --

def stability_q(omega_sec: float, drive: Union[RfDrive, float]) -> tuple[float, bool]:
    """q = 2√2·ω/Ω y la bandera de estabilidad q < 0.908."""
    omega_rf = drive.omega_rf if isinstance(drive, RfDrive) else float(drive)
    q = 2 * np.sqrt(2) * float(omega_sec) / omega_rf
    return q, q < Q_STABILITY_LIMIT


def lifetime_estimate(pressure: float = LIFETIME_PRESSURE, temperature: float = LIFETIME_TEMPERATURE,
                      cross_section: float = LIFETIME_CROSS_SECTION,
                      bg_mass: float = LIFETIME_BG_MASS) -> float:
    """Vida media (s) limitada por colisiones con el gas residual."""
    if min(pressure, temperature, cross_section, bg_mass) <= 0:
        raise ConfigurationError("Todos los parámetros de la vida media deben ser positivos")
    kt = K_B * temperature
    return float(kt * np.log(2) / (pressure * cross_section) * np.sqrt(np.pi * bg_mass / (8 * kt)))


def anisotropy(triple: SecularTriple) -> float:
    """ω_axial² / ω_radial² con el eje axial en x y la radial más blanda."""
    omega = triple.cartesian()
    return float(omega[0] ** 2 / min(omega[1], omega[2]) ** 2)


def height_spread(positions) -> float:
    """(max z - min z) / z medio."""
    z = np.asarray(positions, dtype=float)[:, 2]
    return float((z.max() - z.min()) / z.mean())


def anharmonic_fit(field: ScalarField, minimum, window: float, charge: int = 1, direction=None,
                   reference_kappa2: Optional[float] = None, n_samples: int = 41) -> AnharmonicFit:
    """
    Ajuste polinómico de grado 4 del potencial a lo largo de la dirección axial.

    Args:
        field: Potencial secular en volts.
        minimum: Mínimo del pozo.
        window: Semiancho de la ventana de ajuste en metros.
        charge: Número de carga Z.
        direction: Dirección del ajuste; por defecto el eje principal más alineado con x.
        reference_kappa2: κ2 del pozo de referencia para α; por defecto el propio κ2.

    Raises:
        FitError: si el ajuste está mal condicionado, si κ2 <= 0 o si el residuo supera el 1 %.
    """
    minimum = np.asarray(minimum, dtype=float)
    if direction is None:
        _, vectors = np.linalg.eigh(field.hessian(minimum))
        direction = vectors[:, int(np.argmax(np.abs(vectors[0, :])))]
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if direction[np.argmax(np.abs(direction))] < 0:
        direction = -direction

    s = np.linspace(-window, window, n_samples)
    t = s / window
    values = field.values(minimum + s[:, None] * direction[None, :])
    values = values - field.value(minimum)

    vander = np.polynomial.polynomial.polyvander(t, 4)
    condition = float(np.linalg.cond(vander))
    if not np.isfinite(condition) or condition > 1e10:
        raise FitError("Ajuste anarmónico mal condicionado", condition_number=condition)
    coefs = np.polynomial.polynomial.polyfit(t, values, 4)
    residual = float(np.max(np.abs(values - vander @ coefs)))
    if coefs[2] <= 0:
        raise FitError(f"κ2 no positivo en el ajuste ({coefs[2]:.3e})", condition_number=condition)
    if residual > 1e-2 * coefs[2]:
        raise FitError(f"La ventana de {window:.2e} m es demasiado grande: residuo {residual:.3e} V",
                       condition_number=condition)

    tiny = 1e-9 * coefs[2]
    coefs = np.where(np.abs(coefs) < tiny, 0.0, coefs)
    kappa = coefs / window ** np.arange(5)
    kappa2, kappa3, kappa4 = kappa[2], kappa[3], kappa[4]

    def scale(kn: float, n: int) -> Optional[float]:
        if kn == 0:
            return None
        return float(np.sign(kn) * (abs(kn) / kappa2) ** (1.0 / (2 - n)))

    char_length = (charge * E_CHARGE / (8 * np.pi * EPS0 * kappa2)) ** (1 / 3)
    kappa2_ref = kappa2 if reference_kappa2 is None else reference_kappa2
    alpha = char_length**2 * kappa4 * kappa2_ref / kappa2**2
    return AnharmonicFit(
        kappa2=float(kappa2), kappa3=float(kappa3), kappa4=float(kappa4),
        lambda3=scale(kappa3, 3), lambda4=scale(kappa4, 4),
        char_length=float(char_length), alpha=float(alpha), condition_number=condition,
    )


# -- Análisis de pozos --

def locate_wells(layout: TrapLayout, drive: Optional[RfDrive], sp: Species, dc_voltages: DcVoltages = None,
                 height: float = 20e-6) -> list[SecularTriple]:
    """Busca el mínimo cercano a cada posición inicial del diseño y calcula su triple secular."""
    field = secular_potential(layout, drive, sp, dc_voltages)
    wells = []
    for k, guess in enumerate(layout.well_guesses(height)):
        try:
            minimum = find_minimum(field, guess)
            wells.append(secular_frequencies(field, minimum, sp))
        except (SearchError, NotATrapError) as e:
            logger.warning(f"Pozo {k}: no se encontró un mínimo estable ({e})")
    return wells


def analyze_wells(layout: TrapLayout, drive: Optional[RfDrive], sp: Species, dc_voltages: DcVoltages = None,
                  height: float = 20e-6, box_height: float = 100e-6,
                  anisotropy_limit: float = 0.4) -> list[WellReport]:
    """Mínimo, frecuencias, profundidad, q y anisotropía de cada pozo del diseño."""
    drive = drive or layout.drive
    field = secular_potential(layout, drive, sp, dc_voltages)
    wells = locate_wells(layout, drive, sp, dc_voltages, height)
    minima = [w.minimum for w in wells]
    reports = []
    for k, triple in enumerate(wells):
        neighbors = [minima[j] for j in (k - 1, k + 1) if 0 <= j < len(minima)]
        barriers = escape_barriers(field, triple.minimum, neighbors, box_height)
        candidates = [barriers["vertical"]] + ([barriers["interwell"]] if barriers["interwell"] is not None else [])
        depth = min(candidates) * sp.charge * 1e3
        bounded = barriers["bounded"] and min(candidates) == barriers["vertical"]
        q, stable = stability_q(float(np.max(triple.omega)), drive)
        ratio = anisotropy(triple)
        if not stable:
            logger.warning(f"Pozo {k}: q={q:.3f} supera el límite de estabilidad {Q_STABILITY_LIMIT}")
        reports.append(WellReport(
            index=k, secular=triple, depth_mev=float(depth), depth_bounded_by_box=bounded,
            q=q, stable=stable, anisotropy=ratio, linear_crystal=ratio < anisotropy_limit,
        ))
    logger.info(f"Se analizaron {len(reports)} pozos")
    return reports


def potential_slice(field: ScalarField, grid: SliceGrid, charge: int = 1) -> pd.DataFrame:
    """Corte x-z del potencial secular en formato largo (x_m, z_m, energy_ev)."""
    xs = np.linspace(grid.x_min, grid.x_max, grid.nx)
    zs = np.linspace(grid.z_min, grid.z_max, grid.nz)
    xx, zz = np.meshgrid(xs, zs, indexing="ij")
    points = np.column_stack([xx.ravel(), np.full(xx.size, grid.y), zz.ravel()])
    energy = charge * field.values(points)
    return pd.DataFrame({"x_m": points[:, 0], "z_m": points[:, 2], "energy_ev": energy})
