"""
Punto de entrada de línea de comandos.

    iontrap <trap-show|simulate|modes|optimize> --config <ruta> [--out <dir>] [--seed <n>] [--threads <n>]
    iontrap gate <solve|sweep> --config <ruta> [...]

Cada comando lee un RunConfig en YAML, ejecuta su flujo y escribe artefactos con
procedencia en el directorio de salida. Los códigos de salida son estables:
0 ok, 2 configuración, 3 pérdida de ion, 4 cristal inestable, 5 optimizador,
6 compuerta infactible.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from pydantic import ValidationError

from .context import (
    Axis,
    Species,
    RunConfig,
    Settings,
    ModeSpectrum,
    ThermalState,
    TrapLayout,
)
from .context.Models import ModesBlock
from .iontrap_exceptions import (
    IonTrapError,
    ConfigurationError,
    IonLossError,
    OptimizerStallError,
    GateInfeasibleError,
)
from .electrode_field import (
    analyze_wells,
    locate_wells,
    lifetime_estimate,
    potential_slice,
    secular_potential,
    trap_field,
)
from .ion_dynamics import seed_positions, run_equilibrium, relax_crystal
from .normal_modes import (
    analyze_crystal,
    com_offsets,
    detect_segments,
    segment_splitting,
    pinned_pair_anharmonic,
)
from .voltage_optimizer import (
    LayoutFrequencyModel,
    explicit_targets,
    all_to_all_targets,
    pinned_pair_targets,
    optimize,
    sensitivity_report,
)
from .gate_engine import (
    lamb_dicke,
    solve_pulse,
    fidelity,
    detuning_sweep,
    rabi_table,
    sweep_grid,
    synthetic_pair_spectrum,
)
from .exporters import (
    ArtifactWriter,
    config_hash,
    potential_contour,
    interaction_heatmap,
    rabi_bars,
    rabi_heatmap,
    infidelity_curve,
    loss_curve,
)

@dataclass
class RunContext:
    """Todo lo que un comando necesita: configuración efectiva, especie y escritor."""
    config: RunConfig
    species: Species
    writer: ArtifactWriter
    seed: int
    threads: int


def setup_logger(settings: Settings, out_dir: Optional[Path] = None):
    """
    Configura loguru: consola al nivel de IONTRAP_LOG y, si hay directorio de salida,
    un archivo iontrap.log en él.
    """
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.add(
            out_dir / "iontrap.log",
            level=settings.log_level,
            format="{time} {level} {message}",
            encoding="utf-8",
            mode="w",
        )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, required=True, help="Archivo YAML de la ejecución")
    common.add_argument("--out", type=Path, default=None, help="Directorio de salida")
    common.add_argument("--seed", type=int, default=None, help="Semilla del generador aleatorio")
    common.add_argument("--threads", type=int, default=None, help="Máximo de hilos de trabajo")

    parser = argparse.ArgumentParser(prog="iontrap", description="Trampas iónicas superficiales de múltiples pozos")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("trap-show", parents=[common], help="Pozos, profundidades y mapa del pseudopotencial")
    commands.add_parser("simulate", parents=[common], help="Dinámica de Langevin hasta el equilibrio")
    commands.add_parser("modes", parents=[common], help="Modos normales, matrices de interacción y segmentos")
    commands.add_parser("optimize", parents=[common], help="Optimización de voltajes DC")
    gate = commands.add_parser("gate", help="Síntesis y barrido de compuertas MS")
    actions = gate.add_subparsers(dest="action", required=True)
    actions.add_parser("solve", parents=[common], help="Resuelve el pulso segmentado")
    actions.add_parser("sweep", parents=[common], help="Barrido de infidelidad en la desintonía")
    return parser


def _load_layout(ctx: RunContext) -> tuple[TrapLayout, dict]:
    return ctx.config.load_layout(), ctx.config.load_dc_voltages()


# -- Comandos --

def cmd_trap_show(ctx: RunContext) -> int:
    layout, dc = _load_layout(ctx)
    block = ctx.config.trap_show
    reports = analyze_wells(layout, layout.drive, ctx.species, dc, height=block.height_guess,
                            box_height=block.depth_box, anisotropy_limit=block.anisotropy_limit)
    rows = [r.as_row() for r in reports]
    ctx.writer.write_csv("wells.csv", pd.DataFrame(rows))
    ctx.writer.write_json("wells.json", {
        "layout": layout.name,
        "species": ctx.species.label,
        "n_wells": len(reports),
        "wells": rows,
        "lifetime_s": lifetime_estimate(),
    })

    if layout.electrodes:
        field = secular_potential(layout, layout.drive, ctx.species, dc)
        grid = potential_slice(field, block.slice, ctx.species.charge)
        ctx.writer.write_csv("potential_slice.csv", grid)
        minima = np.array([r.secular.minimum for r in reports]).reshape(-1, 3)
        ctx.writer.write_svg("potential_slice.svg", potential_contour(grid, minima))
    else:
        logger.warning("El diseño no tiene electrodos; se omite el corte del potencial")
    logger.success(f"trap-show: {len(reports)} pozos")
    return 0


def _ions_per_well(requested: Optional[list[int]], n_wells: int) -> list[int]:
    return list(requested) if requested is not None else [1] * n_wells


def cmd_simulate(ctx: RunContext) -> int:
    layout, dc = _load_layout(ctx)
    block = ctx.config.sim
    wells = locate_wells(layout, layout.drive, ctx.species, dc, ctx.config.trap_show.height_guess)
    counts = _ions_per_well(block.ions_per_well, len(wells))
    initial = seed_positions(wells, counts, ctx.species)
    trap = trap_field(layout, layout.drive, dc)
    sim_config = block.to_sim_config(layout.drive, ctx.seed)
    try:
        result = run_equilibrium(trap, ctx.species, initial, sim_config)
    except IonLossError as e:
        ctx.writer.write_json("loss_report.json", {"ion": e.ion, "time_s": e.time, "message": str(e)})
        raise

    ctx.writer.write_csv("trajectory.csv", result.trajectory.to_frame())
    ctx.writer.write_json("equilibria.json", {
        "species": ctx.species.label,
        "ions_per_well": counts,
        "positions_m": result.positions,
        "residual_amplitude_m": result.residual_amplitude,
        "height_spread": result.height_spread,
    })
    logger.success(f"simulate: {len(result.positions)} iones, dispersión de altura {result.height_spread:.3e}")
    return 0


def _load_equilibria(path: Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if "positions_m" not in data:
        raise ConfigurationError(f"{path} no contiene 'positions_m'")
    return np.asarray(data["positions_m"], dtype=float).reshape(-1, 3)


def _anharmonic_rows(layout: TrapLayout, dc: dict, species: Species, block: ModesBlock, height: float) -> list[dict]:
    field = secular_potential(layout, layout.drive, species, dc)
    wells = locate_wells(layout, layout.drive, species, dc, height)
    pair = block.anharmonic_pair or [len(wells) // 2 - 1, len(wells) // 2]
    return pinned_pair_anharmonic(field, wells, pair, species, block.anharmonic_window,
                                  ions_per_well=block.anharmonic_ions, resonant=block.anharmonic_resonant)


def cmd_modes(ctx: RunContext) -> int:
    layout, dc = _load_layout(ctx)
    block = ctx.config.modes
    trap = trap_field(layout, layout.drive, dc)
    if block.equilibria is not None:
        positions = _load_equilibria(block.equilibria)
    else:
        wells = locate_wells(layout, layout.drive, ctx.species, dc, ctx.config.trap_show.height_guess)
        initial = seed_positions(wells, _ions_per_well(block.ions_per_well, len(wells)), ctx.species)
        positions = relax_crystal(trap, ctx.species, initial)

    coupling_axis = Axis.Z if block.axis == "auto" else Axis.from_label(block.axis)
    analysis = analyze_crystal(trap, positions, ctx.species, block.threshold, coupling_axis)
    spectra = analysis.spectra
    if block.axis != "auto" and analysis.per_axis:
        spectra = {coupling_axis: spectra[coupling_axis]}

    payload = {"per_axis": analysis.per_axis, "sites_hz": [s.cartesian() / (2 * np.pi) for s in analysis.sites]}
    payload["spectra"] = {}
    for axis, spectrum in spectra.items():
        partition = analysis.partitions[axis]
        offsets = com_offsets(spectrum)
        payload["spectra"][axis.value] = {
            **spectrum.to_dict(),
            "com_offsets_hz": offsets,
            "segments": partition.to_list(),
            "segment_splitting": segment_splitting(spectrum, partition),
        }
        fig = interaction_heatmap(spectrum, analysis.interaction[axis], offsets, title=f"Eje {axis.value}")
        ctx.writer.write_svg(f"interaction_{axis.value}.svg", fig)
    ctx.writer.write_json("spectrum.json", payload)
    ctx.writer.write_csv("couplings.csv", pd.DataFrame([c.as_row() for c in analysis.couplings]))

    if block.anharmonic:
        rows = _anharmonic_rows(layout, dc, ctx.species, block, ctx.config.trap_show.height_guess)
        ctx.writer.write_csv("anharmonic_coupling.csv", pd.DataFrame(rows))
    logger.success(f"modes: {len(positions)} iones analizados")
    return 0


def cmd_optimize(ctx: RunContext) -> int:
    layout, dc = _load_layout(ctx)
    block = ctx.config.optimize
    opt_config = block.optimizer
    if "threads" not in opt_config.model_fields_set:
        opt_config = opt_config.model_copy(update={"threads": ctx.threads})

    guesses = layout.well_guesses(ctx.config.trap_show.height_guess)
    if block.sites is not None:
        guesses = guesses[block.sites]
    model = LayoutFrequencyModel(layout, layout.drive, ctx.species, free_ids=block.free_electrodes,
                                 baseline=dc, bounds=opt_config.bounds, guesses=guesses)
    initial = model.free_voltages()
    omega0, _ = model.evaluate(initial)
    axis = Axis.from_label(block.axis)

    if block.mode == "explicit":
        if block.targets_hz is None:
            raise ConfigurationError("El modo 'explicit' requiere optimize.targets_hz")
        targets = explicit_targets(block.targets_hz, axis=block.axis, weights=block.weights)
    elif block.mode == "pinned":
        targets = pinned_pair_targets(omega0, block.pinned_sites, block.pinned_offset_hz, axis, block.weights)
    else:
        targets = all_to_all_targets(omega0, axis, block.weights)

    sensitivity = sensitivity_report(model, initial, threads=opt_config.threads)
    ctx.writer.write_csv("sensitivity.csv", sensitivity)

    result = optimize(model, targets, initial, opt_config, rng=np.random.default_rng(ctx.seed))
    voltages = dict(zip(model.electrode_ids, result.voltages.tolist()))
    full = dict(zip(layout.dc_ids, model.full_vector(result.voltages).tolist()))
    ctx.writer.write_json("optimize.json", {
        "mode": block.mode,
        "axis": block.axis,
        "targets_hz": np.asarray(targets.omega) / (2 * np.pi),
        "voltages": voltages,
        "site_frequencies_hz": result.site_frequencies / (2 * np.pi),
        "flags": result.flags,
        "iterations": result.iterations,
    })
    ctx.writer.write_json("voltages.json", {"dc_voltages": full})
    ctx.writer.write_svg("loss.svg", loss_curve(result.loss_history))

    if not result.converged:
        raise OptimizerStallError("El optimizador no alcanzó la tolerancia; se guardó la mejor solución")
    logger.success("optimize: objetivos alcanzados")
    return 0


def load_spectrum(path: Path, axis: Optional[str] = None) -> ModeSpectrum:
    """Lee un espectro de modos escrito por `modes` (spectrum.json)."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    spectra = data.get("spectra", {})
    if not spectra:
        raise ConfigurationError(f"{path} no contiene espectros")
    key = axis or ("x" if "x" in spectra else next(iter(spectra)))
    if key not in spectra:
        raise ConfigurationError(f"{path} no contiene el eje '{key}'")
    entry = spectra[key]
    return ModeSpectrum(
        axis=Axis.from_label(entry["axis"]),
        omega=2 * np.pi * np.asarray(entry["frequencies_hz"], dtype=float),
        b=np.asarray(entry["eigenvectors"], dtype=float),
    )


def _gate_spectra(ctx: RunContext) -> tuple[ModeSpectrum, ModeSpectrum]:
    """Espectro del segmento (para resolver) y espectro completo (para la fidelidad)."""
    block = ctx.config.gate
    if block.synthetic_pair is not None:
        spectrum = synthetic_pair_spectrum(block.synthetic_pair.center_hz, block.synthetic_pair.splitting_hz)
        return spectrum, spectrum
    if block.spectrum is None:
        raise ConfigurationError("gate requiere 'spectrum' o 'synthetic_pair'")
    spectrum = load_spectrum(block.spectrum)
    if block.segment_modes is not None:
        modes = block.segment_modes
    else:
        _, modes = detect_segments(spectrum, ctx.config.modes.threshold).segment_of_ion(block.pair[0])
    return spectrum.subset(sorted(modes)), spectrum


def cmd_gate(ctx: RunContext, action: str) -> int:
    block = ctx.config.gate
    segment, spectrum = _gate_spectra(ctx)
    thermal = ThermalState(n_bar_c=block.n_bar_c, omega_c=float(segment.omega[segment.com_index()]))

    if action == "solve":
        mu_values = block.mu_hz if isinstance(block.mu_hz, list) else [block.mu_hz]
        template = block.gate_config(mu_values[0])
        if len(mu_values) > 1:
            table = rabi_table(mu_values, template, segment, ctx.species)
            if table.isna().all(axis=None):
                raise GateInfeasibleError("Ninguna desintonía de la lista admite un pulso")
            ctx.writer.write_csv("rabi.csv", table, index=True)
            ctx.writer.write_svg("rabi_heatmap.svg", rabi_heatmap(table))
            logger.success(f"gate solve: {int(table.notna().all(axis=1).sum())} de {len(mu_values)} pulsos")
            return 0

        pulse = solve_pulse(template, segment, lamb_dicke(segment, ctx.species, template))
        result = fidelity(pulse, spectrum, lamb_dicke(spectrum, ctx.species, template), thermal, block.drift,
                          template.pair)
        ctx.writer.write_json("pulse.json", {
            **pulse.to_dict(),
            "pair": list(template.pair),
            "n_segments": template.n_segments,
            "infidelity": result.infidelity,
        })
        ctx.writer.write_svg("rabi.svg", rabi_bars(pulse))
        logger.success(f"gate solve: max|Ω_s|/2π = {pulse.max_rabi / (2 * np.pi):.4g} Hz")
        return 0

    if block.sweep is None:
        raise ConfigurationError("gate sweep requiere el bloque gate.sweep")
    grid = sweep_grid(block.sweep.start_hz, block.sweep.stop_hz, block.sweep.step_hz)
    template = block.gate_config(float(grid[0]))
    frame = detuning_sweep(grid, template, segment, spectrum, ctx.species, thermal, block.drift,
                           threads=ctx.threads, reuse_pulse=block.sweep.reuse_pulse)
    ctx.writer.write_csv("sweep.csv", frame)
    if not frame["feasible"].any():
        raise GateInfeasibleError("Ningún punto del barrido admite un pulso")
    ctx.writer.write_svg("infidelity.svg", infidelity_curve(frame, label=f"n̄_c = {block.n_bar_c:g}"))
    logger.success(f"gate sweep: infidelidad máxima {frame['infidelity'].max():.3e}")
    return 0


def run(args: argparse.Namespace, settings: Settings) -> int:
    config = RunConfig.from_yaml(args.config)
    seed = args.seed if args.seed is not None else config.seed
    config = config.model_copy(update={"seed": seed})
    threads = args.threads or settings.threads
    out_dir = Path(args.out or config.output_dir or settings.output_dir)
    setup_logger(settings, out_dir)
    logger.info(f"Comando {args.command} con semilla {seed} y {threads} hilo(s); salida en {out_dir}")

    writer = ArtifactWriter(out_dir, config_hash(config), seed)
    ctx = RunContext(config=config, species=config.load_species(), writer=writer, seed=seed, threads=threads)
    handlers = {
        "trap-show": cmd_trap_show,
        "simulate": cmd_simulate,
        "modes": cmd_modes,
        "optimize": cmd_optimize,
    }
    if args.command == "gate":
        return cmd_gate(ctx, args.action)
    return handlers[args.command](ctx)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings()
    except ValidationError as e:
        logger.error(f"Error de validación en las variables de entorno: {e}")
        return ConfigurationError.exit_code
    setup_logger(settings)

    try:
        return run(args, settings)
    except ValidationError as e:
        logger.error(f"Error de validación en la configuración: {e}")
        return ConfigurationError.exit_code
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (línea {mark.line + 1}, columna {mark.column + 1})" if mark is not None else ""
        logger.error(f"Error al parsear YAML{where}: {e}")
        return ConfigurationError.exit_code
    except json.JSONDecodeError as e:
        logger.error(f"Error al parsear JSON (línea {e.lineno}, columna {e.colno}): {e.msg}")
        return ConfigurationError.exit_code
    except IonTrapError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
