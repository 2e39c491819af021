"""
Figuras SVG de los comandos: mapa del pseudopotencial, matriz de interacción,
pulsos de Rabi y curva de infidelidad.
"""

from typing import Optional, Sequence

import numpy as np
import pandas as pd
from matplotlib import pyplot as plt
from matplotlib.figure import Figure

from ..context import ModeSpectrum, InteractionMatrix, PulseSolution

FIGURE_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (6.0, 4.0),
    "svg.fonttype": "path",
}


def _new(**kwargs) -> tuple[Figure, plt.Axes]:
    with plt.rc_context(FIGURE_STYLE):
        return plt.subplots(**kwargs)


def potential_contour(grid: pd.DataFrame, minima: Optional[np.ndarray] = None, levels: int = 30) -> Figure:
    """Contorno de la energía (meV) en el plano x-z a partir del CSV largo (x_m, z_m, energy_ev)."""
    table = grid.pivot(index="z_m", columns="x_m", values="energy_ev")
    x = table.columns.to_numpy() * 1e6
    z = table.index.to_numpy() * 1e6
    fig, ax = _new()
    filled = ax.contourf(x, z, table.to_numpy() * 1e3, levels=levels, cmap="viridis")
    fig.colorbar(filled, ax=ax, label="Energía (meV)")
    if minima is not None and len(minima):
        minima = np.atleast_2d(minima)
        ax.plot(minima[:, 0] * 1e6, minima[:, 2] * 1e6, "w+", markersize=6)
    ax.set_xlabel("x (μm)")
    ax.set_ylabel("z (μm)")
    return fig


def interaction_heatmap(spectrum: ModeSpectrum, matrix: InteractionMatrix, offsets_hz: Sequence[float],
                        title: Optional[str] = None) -> Figure:
    """Matriz de interacción (iones x modos) con el desplazamiento de cada modo respecto al COM."""
    fig, ax = _new()
    image = ax.imshow(matrix.M.T, cmap="RdBu_r", vmin=-1, vmax=1, aspect="auto", origin="lower")
    fig.colorbar(image, ax=ax, pad=0.15)
    ax.set_xlabel("Ion")
    ax.set_ylabel("Modo")
    ax.set_xticks(range(matrix.M.shape[0]))
    ax.set_yticks(range(spectrum.n_modes))
    right = ax.twinx()
    right.set_ylim(ax.get_ylim())
    right.set_yticks(range(spectrum.n_modes))
    right.set_yticklabels([f"{value / 1e3:+.2f}" for value in offsets_hz])
    right.set_ylabel("Δf respecto al COM (kHz)")
    if title:
        ax.set_title(title)
    return fig


def rabi_bars(pulse: PulseSolution) -> Figure:
    """Frecuencia de Rabi por intervalo de un pulso resuelto."""
    values = pulse.omega_s / (2 * np.pi) / 1e6
    fig, ax = _new()
    ax.bar(np.arange(1, len(values) + 1), values, color="tab:blue")
    ax.axhline(0.0, color="black", linewidth=0.6)
    ax.set_xlabel("Intervalo")
    ax.set_ylabel("Ω_s / 2π (MHz)")
    ax.set_title(f"μ/2π = {pulse.mu / (2 * np.pi) / 1e6:.6f} MHz")
    return fig


def rabi_heatmap(table: pd.DataFrame) -> Figure:
    """Frecuencia de Rabi (MHz) por intervalo y desintonía; las filas infactibles quedan vacías."""
    fig, ax = _new()
    mu_mhz = table.index.to_numpy() / 1e6
    extent = [0.5, table.shape[1] + 0.5, 0, len(mu_mhz)]
    image = ax.imshow(table.to_numpy() / 1e6, aspect="auto", origin="lower", cmap="RdBu_r", extent=extent)
    fig.colorbar(image, ax=ax, label="Ω_s / 2π (MHz)")
    ticks = np.arange(len(mu_mhz)) + 0.5
    step = max(1, len(mu_mhz) // 10)
    ax.set_yticks(ticks[::step])
    ax.set_yticklabels([f"{value:.5f}" for value in mu_mhz[::step]])
    ax.set_xlabel("Intervalo")
    ax.set_ylabel("μ/2π (MHz)")
    return fig


def infidelity_curve(sweep: pd.DataFrame, label: Optional[str] = None) -> Figure:
    """Infidelidad frente a la desintonía en escala logarítmica."""
    feasible = sweep[sweep["feasible"]]
    fig, ax = _new()
    ax.semilogy(feasible["mu_hz"] / 1e6, feasible["infidelity"].clip(lower=1e-16), linewidth=0.8, label=label)
    ax.set_xlabel("μ/2π (MHz)")
    ax.set_ylabel("1 - F")
    ax.grid(True, which="both", linewidth=0.3)
    if label:
        ax.legend()
    return fig


def loss_curve(history: Sequence[float]) -> Figure:
    """Evolución de la pérdida del optimizador."""
    fig, ax = _new()
    ax.semilogy(np.arange(len(history)), np.maximum(np.asarray(history, dtype=float), 1e-30))
    ax.set_xlabel("Iteración")
    ax.set_ylabel("Pérdida (Hz²)")
    ax.grid(True, which="both", linewidth=0.3)
    return fig
