"""
Modos normales de cristales de iones en trampas de múltiples pozos.

Las coordenadas se ordenan por ion (índice 3·i + k). El Hessiano ensamblado
está ponderado por masa, de modo que sus autovalores son directamente ω_m².
"""

from typing import Optional, Sequence, Union

import numpy as np
from loguru import logger
from scipy import constants
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .context import (
    Axis,
    Species,
    SecularTriple,
    ModeSpectrum,
    InteractionMatrix,
    SegmentPartition,
    CouplingReport,
    CrystalAnalysis,
    AnharmonicFit,
)
from .fields import ScalarField, TimeDependentField
from .electrode_field import anharmonic_fit, secular_frequencies
from .iontrap_exceptions import ConfigurationError, NearCollisionError, UnstableCrystalError

E_CHARGE = constants.e
K_COULOMB = 1 / (4 * np.pi * constants.epsilon_0)
MIN_SEPARATION = 1e-9
CROSS_AXIS_LIMIT = 1e-6

SpeciesArg = Union[Species, Sequence[Species]]


def _species_list(species: SpeciesArg, n: int) -> list[Species]:
    if isinstance(species, Species):
        return [species] * n
    species = list(species)
    if len(species) != n:
        raise ConfigurationError(f"Se esperaban {n} especies y se recibieron {len(species)}")
    return species


def _dominant_index(column: np.ndarray) -> int:
    """Primer índice cuya magnitud alcanza el máximo (desempate estable)."""
    mags = np.abs(column)
    return int(np.flatnonzero(mags >= mags.max() * (1 - 1e-9))[0])


def _canonical_signs(b: np.ndarray) -> np.ndarray:
    b = b.copy()
    for m in range(b.shape[1]):
        if b[_dominant_index(b[:, m]), m] < 0:
            b[:, m] *= -1
    return b


# -- Pruebas de Hessianos --

def coulomb_hessian(positions, charges) -> np.ndarray:
    """
    Hessiano (J/m²) de la energía de Coulomb Σ k Z_i Z_j e² / r_ij.

    Raises:
        NearCollisionError: si dos iones están a menos de 1 nm.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    charges = np.broadcast_to(np.asarray(charges, dtype=float), (len(positions),))
    n = len(positions)
    hess = np.zeros((3 * n, 3 * n))
    for i in range(n):
        for j in range(i + 1, n):
            r = positions[i] - positions[j]
            d = float(np.linalg.norm(r))
            if d < MIN_SEPARATION:
                raise NearCollisionError(f"Los iones {i} y {j} están a {d:.3e} m")
            block = K_COULOMB * charges[i] * charges[j] * E_CHARGE**2 * (3 * np.outer(r, r) - d**2 * np.eye(3)) / d**5
            si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
            hess[si, sj] -= block
            hess[sj, si] -= block
            hess[si, si] += block
            hess[sj, sj] += block
    return hess


def site_curvature(triple: SecularTriple, mass: float) -> np.ndarray:
    """Tensor de rigidez (N/m) del pozo: m · A diag(ω²) Aᵀ."""
    axes = triple.principal_axes
    return mass * axes @ np.diag(triple.omega**2) @ axes.T


def assemble_hessian(sites: Sequence[SecularTriple], positions, species: SpeciesArg) -> dict:
    """
    Hessiano ponderado por masa H_ij = (∂²U/∂q_i∂q_j) / sqrt(m_i m_j).

    Returns:
        Diccionario {Axis.FULL3N: (3N, 3N), Axis.X/Y/Z: (N, N)}.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    n = len(positions)
    if len(sites) != n:
        raise ConfigurationError(f"Hay {len(sites)} triples seculares para {n} iones")
    species = _species_list(species, n)

    stiffness = coulomb_hessian(positions, [sp.charge for sp in species])
    for i, (triple, sp) in enumerate(zip(sites, species)):
        stiffness[3 * i:3 * i + 3, 3 * i:3 * i + 3] += site_curvature(triple, sp.mass)
    masses = np.repeat([sp.mass for sp in species], 3)
    full = stiffness / np.sqrt(np.outer(masses, masses))
    full = 0.5 * (full + full.T)
    hessians = {Axis.FULL3N: full}
    for axis in (Axis.X, Axis.Y, Axis.Z):
        hessians[axis] = full[axis.index::3, axis.index::3].copy()
    return hessians


def cross_axis_coupled(full: np.ndarray, limit: float = CROSS_AXIS_LIMIT) -> bool:
    """True si algún bloque entre ejes supera `limit` veces la escala de los bloques diagonales."""
    diag_scale = max(float(np.max(np.abs(full[k::3, k::3]))) for k in range(3))
    cross = max(float(np.max(np.abs(full[a::3, b::3]))) for a in range(3) for b in range(3) if a != b)
    return cross > limit * diag_scale


def diagonalize(H: np.ndarray, axis: Axis = Axis.FULL3N) -> ModeSpectrum:
    """
    Diagonaliza un Hessiano simétrico; frecuencias ascendentes y autovectores ortonormales.

    Raises:
        ValueError: si H no es simétrica.
        UnstableCrystalError: si hay autovalores negativos (frecuencias imaginarias).
    """
    H = np.asarray(H, dtype=float)
    scale = max(float(np.max(np.abs(H))), 1e-300)
    if H.shape[0] != H.shape[1] or not np.allclose(H, H.T, rtol=0, atol=1e-12 * scale):
        raise ValueError("El Hessiano debe ser una matriz cuadrada simétrica")
    eig, b = np.linalg.eigh(H)
    tol = 1e-12 * max(float(np.max(np.abs(eig))), 1e-300)
    unstable = [m for m, w2 in enumerate(eig) if w2 < -tol]
    if unstable:
        raise UnstableCrystalError(
            f"El cristal tiene {len(unstable)} modos con frecuencia imaginaria",
            imaginary_modes=unstable,
        )
    omega = np.sqrt(np.clip(eig, 0.0, None))
    return ModeSpectrum(axis=axis, omega=omega, b=_canonical_signs(b))


def interaction_matrix(spectrum: ModeSpectrum) -> InteractionMatrix:
    """Reescala cada columna de b por su entrada de mayor magnitud, conservando el signo."""
    b = spectrum.b
    pivots = np.array([b[_dominant_index(b[:, m]), m] for m in range(b.shape[1])])
    return InteractionMatrix(M=b / pivots[None, :])


def com_offsets(spectrum: ModeSpectrum) -> np.ndarray:
    """Desplazamiento de frecuencia (Hz) de cada modo respecto al modo de centro de masa."""
    return spectrum.omega_hz - spectrum.omega_hz[spectrum.com_index()]


# -- Acoplamiento entre pozos --

def coupling_strength(sp_i: Species, sp_j: Species, omega_i: float, omega_j: float, d_ion: float) -> float:
    """Ω_I = Z_i Z_j e² / (4πε₀ sqrt(m_i m_j) sqrt(ω_i ω_j) d³) en rad/s."""
    return float(
        K_COULOMB * sp_i.charge * sp_j.charge * E_CHARGE**2
        / (np.sqrt(sp_i.mass * sp_j.mass) * np.sqrt(omega_i * omega_j) * d_ion**3)
    )


def resonance_detuning(omega_i: float, omega_j: float, coupling: Optional[float] = None,
                       threshold: float = 1.0) -> tuple[float, Optional[bool]]:
    """
    Δ_- = (ω_i - ω_j)/2 y la bandera de acoplamiento |Δ_-| <= threshold·Ω_I.
    Sin Ω_I la bandera es None.
    """
    delta = 0.5 * (omega_i - omega_j)
    if coupling is None:
        return float(delta), None
    return float(delta), bool(abs(delta) <= threshold * coupling)


def pair_couplings(sites: Sequence[SecularTriple], species: SpeciesArg, axis: Axis = Axis.Z,
                   threshold: float = 1.0) -> list[CouplingReport]:
    """Reporte de acoplamiento para cada par de sitios vecinos, en el orden dado."""
    species = _species_list(species, len(sites))
    reports = []
    for i in range(len(sites) - 1):
        j = i + 1
        w_i, w_j = sites[i].along(axis), sites[j].along(axis)
        d = float(np.linalg.norm(sites[i].minimum - sites[j].minimum))
        coupling = coupling_strength(species[i], species[j], w_i, w_j, d)
        delta, coupled = resonance_detuning(w_i, w_j, coupling, threshold)
        reports.append(CouplingReport(pair=(i, j), omega_i=w_i, omega_j=w_j, Omega_I=coupling,
                                      delta_minus=delta, coupled=coupled))
    return reports


# -- Segmentación --

def detect_segments(spectrum: ModeSpectrum, threshold: float = 1e-4) -> SegmentPartition:
    """
    Particiona iones y modos: el ion i toca el modo m si |b_im| / max_i' |b_i'm| > threshold.
    Los segmentos son las componentes conexas del grafo bipartito ion-modo.
    """
    b = np.abs(spectrum.b)
    if spectrum.axis is Axis.FULL3N:
        b = b.reshape(-1, 3, b.shape[1]).max(axis=1)
    n_ions, n_modes = b.shape
    ratio = b / np.maximum(b.max(axis=0, keepdims=True), 1e-300)
    ions, modes = np.nonzero(ratio > threshold)
    graph = coo_matrix((np.ones(len(ions)), (ions, n_ions + modes)), shape=(n_ions + n_modes,) * 2)
    n_comp, labels = connected_components(graph, directed=False)

    segments = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        seg_ions = frozenset(int(k) for k in members if k < n_ions)
        seg_modes = frozenset(int(k - n_ions) for k in members if k >= n_ions)
        segments.append((seg_ions, seg_modes))
    segments.sort(key=lambda s: min(s[0]) if s[0] else n_ions + min(s[1]))
    logger.debug(f"Se detectaron {len(segments)} segmentos con umbral {threshold:g}")
    return SegmentPartition(segments=segments, threshold=threshold)


def segment_splitting(spectrum: ModeSpectrum, partition: SegmentPartition) -> list[dict]:
    """Dispersión de frecuencias (Hz) de cada segmento con más de un modo."""
    rows = []
    for ions, modes in partition.segments:
        if len(modes) < 2:
            continue
        freqs = spectrum.omega_hz[sorted(modes)]
        rows.append({"ions": sorted(ions), "modes": sorted(modes), "spread_hz": float(freqs.max() - freqs.min())})
    return rows


# -- Análisis completo --

def analyze_crystal(trap: TimeDependentField, positions, species: SpeciesArg, threshold: float = 1e-4,
                    coupling_axis: Axis = Axis.Z) -> CrystalAnalysis:
    """
    Frecuencias locales en cada ion, Hessianos, espectros por eje (o 3N si los ejes
    se acoplan), matrices de interacción, segmentos y acoplamientos entre vecinos.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    order = np.argsort(positions[:, 0], kind="stable")
    if not np.array_equal(order, np.arange(len(positions))):
        logger.debug("Los iones se reordenan por x creciente")
    positions = positions[order]
    species = [_species_list(species, len(order))[k] for k in order]

    sites = [
        secular_frequencies(trap.secular_field(sp.charge, sp.mass), p, sp)
        for p, sp in zip(positions, species)
    ]
    hessians = assemble_hessian(sites, positions, species)
    per_axis = not cross_axis_coupled(hessians[Axis.FULL3N])
    axes = (Axis.X, Axis.Y, Axis.Z) if per_axis else (Axis.FULL3N,)
    if not per_axis:
        logger.info("Los ejes principales están acoplados; se usa el análisis 3N completo")

    spectra = {axis: diagonalize(hessians[axis], axis) for axis in axes}
    interaction = {axis: interaction_matrix(spec) for axis, spec in spectra.items()}
    partitions = {axis: detect_segments(spec, threshold) for axis, spec in spectra.items()}
    return CrystalAnalysis(
        sites=sites, spectra=spectra, interaction=interaction, partitions=partitions,
        per_axis=per_axis, couplings=pair_couplings(sites, species, coupling_axis),
    )


# -- Jacobiano anarmónico --

def anharmonic_energy(u, kappa_ratios, alpha, centers) -> float:
    """
    Energía adimensional Σ[r_n δu²/2 + (α_n/2) δu⁴] + Σ_{n<p} 1/|u_n - u_p|,
    con δu_n = u_n - c_n. Su Hessiano es el Jacobiano anarmónico.
    """
    u = np.asarray(u, dtype=float)
    du = u - np.asarray(centers, dtype=float)
    energy = np.sum(np.asarray(kappa_ratios) * du**2 / 2 + np.asarray(alpha) / 2 * du**4)
    diff = np.abs(u[:, None] - u[None, :])
    iu = np.triu_indices(len(u), k=1)
    return float(energy + np.sum(1.0 / diff[iu]))


def _anharmonic_gradient(u, kappa_ratios, alpha, centers) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    du = u - np.asarray(centers, dtype=float)
    grad = np.asarray(kappa_ratios) * du + 2 * np.asarray(alpha) * du**3
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    grad -= np.sum(np.sign(diff) / diff**2, axis=1)
    return grad


def anharmonic_jacobian(u, kappa_ratios, alpha, centers=None,
                        omega_ref: float = 1.0) -> tuple[np.ndarray, ModeSpectrum]:
    """
    Jacobiano adimensional A_nm para iones sobre el eje axial.

    Diagonal: κ2^n/κ2^o + 6 α_n δu_n² + 2 Σ_{p≠n} 1/|u_n - u_p|³.
    Fuera de la diagonal: -2/|u_n - u_m|³.
    Las frecuencias del espectro se expresan en unidades de omega_ref.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    centers = u if centers is None else np.asarray(centers, dtype=float)
    du = u - centers
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    if np.any(diff < 1e-12):
        raise NearCollisionError("Posiciones adimensionales duplicadas en el Jacobiano")
    coulomb = 2.0 / diff**3
    A = -coulomb
    A[np.diag_indices(n)] = np.asarray(kappa_ratios) + 6 * np.asarray(alpha) * du**2 + coulomb.sum(axis=1)
    spectrum = diagonalize(A, Axis.X)
    spectrum = ModeSpectrum(axis=Axis.X, omega=spectrum.omega * omega_ref, b=spectrum.b)
    return A, spectrum


def anharmonic_equilibrium(centers, kappa_ratios, alpha) -> np.ndarray:
    """Equilibrio adimensional minimizando anharmonic_energy desde los centros de los pozos."""
    centers = np.asarray(centers, dtype=float)
    start = centers.copy()
    for c in np.unique(centers):
        members = np.flatnonzero(centers == c)
        start[members] += np.arange(len(members)) - 0.5 * (len(members) - 1)
    start += 1e-3 * (np.arange(len(centers)) - 0.5 * (len(centers) - 1))
    res = minimize(anharmonic_energy, start, args=(kappa_ratios, alpha, centers),
                   jac=_anharmonic_gradient, method="BFGS", options={"gtol": 1e-12})
    return res.x


def anharmonic_coupling(fits: Sequence[AnharmonicFit], centers_m, sp: Species,
                        ions_per_well: int = 1, resonant: bool = True) -> dict:
    """
    Acoplamiento entre pozos (Hz) con y sin el término octupolar.

    El acoplamiento es la separación entre los dos modos más bajos, los de centro de
    masa de cada pozo. κ2^o y l salen del pozo más rígido. Con resonant=True todos los
    pozos se llevan a κ2^o y α_n = l² κ4^n / κ2^o, de modo que solo queda el desdoblamiento
    de Coulomb; con resonant=False se usan los κ2 ajustados y la separación incluye la
    desintonía entre pozos.

    Args:
        fits: Ajuste anarmónico de cada pozo.
        centers_m: Posiciones axiales de los centros de los pozos (m).
        sp: Especie atrapada.
        ions_per_well: Iones en cada pozo.
        resonant: Si se sintonizan los pozos a la misma curvatura.
    """
    if ions_per_well < 1:
        raise ConfigurationError(f"ions_per_well debe ser positivo, no {ions_per_well}")
    if len(fits) != len(centers_m) or len(fits) < 2:
        raise ConfigurationError("Se necesitan al menos dos pozos con un centro por ajuste")
    kappa2 = np.array([f.kappa2 for f in fits])
    kappa4 = np.array([f.kappa4 for f in fits])
    ref_fit = fits[int(np.argmax(kappa2))]
    kappa2_ref = ref_fit.kappa2
    length = ref_fit.char_length
    omega_ref = np.sqrt(2 * sp.charge * E_CHARGE * kappa2_ref / sp.mass)
    if resonant:
        ratios = np.ones(len(fits))
        alpha = length**2 * kappa4 / kappa2_ref
    else:
        ratios = kappa2 / kappa2_ref
        alpha = length**2 * kappa4 * kappa2_ref / kappa2**2

    centers = np.repeat(np.asarray(centers_m, dtype=float) / length, ions_per_well)
    ratios_ion = np.repeat(ratios, ions_per_well)
    alpha_ion = np.repeat(alpha, ions_per_well)
    result = {"alpha": [float(a) for a in alpha]}
    for label, a in (("harmonic_hz", np.zeros_like(alpha_ion)), ("anharmonic_hz", alpha_ion)):
        u = anharmonic_equilibrium(centers, ratios_ion, a)
        _, spectrum = anharmonic_jacobian(u, ratios_ion, a, centers, omega_ref)
        lowest = np.sort(spectrum.omega_hz)[:2]
        result[label] = float(lowest[1] - lowest[0])
    logger.info(f"Acoplamiento con {ions_per_well} iones por pozo: armónico {result['harmonic_hz']:.1f} Hz, "
                f"anarmónico {result['anharmonic_hz']:.1f} Hz")
    return result


def pinned_pair_anharmonic(field: ScalarField, wells: Sequence[SecularTriple], pair: Sequence[int],
                           sp: Species, window: float, ions_per_well: Sequence[int] = (2, 3),
                           resonant: bool = True) -> list[dict]:
    """Filas de acoplamiento armónico y anarmónico del par fijado, una por número de iones por pozo."""
    if len(pair) != 2 or any(not 0 <= k < len(wells) for k in pair):
        raise ConfigurationError(f"Par de pozos inválido: {list(pair)}")
    fits = [anharmonic_fit(field, wells[k].minimum, window, sp.charge, direction=[1.0, 0.0, 0.0]) for k in pair]
    centers = [wells[k].minimum[0] for k in pair]
    rows = []
    for n in ions_per_well:
        coupling = anharmonic_coupling(fits, centers, sp, ions_per_well=n, resonant=resonant)
        alpha = coupling.pop("alpha")
        rows.append({
            "wells": "-".join(str(k) for k in pair), "ions_per_well": n, **coupling,
            "ratio": coupling["anharmonic_hz"] / coupling["harmonic_hz"],
            **{f"alpha_{k}": a for k, a in zip(pair, alpha)},
        })
    return rows
