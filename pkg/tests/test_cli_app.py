# tests/test_cli_app.py
import json
from pathlib import Path

import pytest
import yaml

from iontrap.cli_app import build_parser, main
from iontrap.exporters.artifacts import read_csv

RUNS = Path(__file__).resolve().parents[1] / "config" / "runs"


def _gate_config(**overrides) -> dict:
    """Par sintético de Be a 22.4 MHz, sin deriva ni ocupación térmica."""
    gate = {
        "pair": [0, 1],
        "t_g": 2.0e-4,
        "mu_hz": 22.42e6,
        "n_segments": 5,
        "allow_negative_phase": True,
        "synthetic_pair": {"center_hz": 22.4e6, "splitting_hz": 1.7e3},
    }
    gate.update(overrides)
    return {"species": "Be9", "seed": 5, "gate": gate}


@pytest.fixture
def write_config(tmp_path: Path):
    """Escribe un diccionario como YAML y devuelve la ruta."""
    def _write(data: dict, name: str = "run.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return path
    return _write


def _provenance_line(path: Path) -> dict:
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first.startswith("# provenance: ")
    return json.loads(first[len("# provenance: "):])


# -- Pruebas para el parser --

def test_parser_reads_gate_subcommand():
    args = build_parser().parse_args(["gate", "sweep", "--config", "run.yaml", "--seed", "4", "--threads", "2"])

    assert args.command == "gate"
    assert args.action == "sweep"
    assert args.config == Path("run.yaml")
    assert args.seed == 4
    assert args.threads == 2


def test_parser_requires_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["modes"])


def test_example_configs_are_valid_yaml():
    for path in sorted(RUNS.glob("*.yaml")):
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        assert isinstance(data, dict), path.name


# -- Pruebas para los códigos de salida --

def test_malformed_yaml_exits_with_configuration_code(tmp_path: Path):
    path = tmp_path / "broken.yaml"
    path.write_text("gate:\n  pair: [0, 1\n", encoding="utf-8")

    assert main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_missing_referenced_file_exits_with_configuration_code(tmp_path: Path, write_config):
    path = write_config({"layout": "no_existe.json", "species": "Ca40"})

    assert main(["trap-show", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_unknown_species_exits_with_configuration_code(tmp_path: Path, write_config):
    path = write_config({**_gate_config(), "species": "Xe131"})

    assert main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_invalid_log_level_exits_with_configuration_code(tmp_path: Path, write_config, monkeypatch):
    monkeypatch.setenv("IONTRAP_LOG", "verbose")
    path = write_config(_gate_config())

    assert main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


def test_too_few_segments_exits_with_gate_code(tmp_path: Path, write_config):
    # Dos modos imponen cuatro ecuaciones reales sobre tres intervalos
    path = write_config(_gate_config(n_segments=3))

    assert main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "out")]) == 6


# -- Pruebas para gate solve --

def test_gate_solve_writes_pulse_with_provenance(tmp_path: Path, write_config):
    # Arrange
    path = write_config(_gate_config())
    out = tmp_path / "out"

    # Act
    code = main(["gate", "solve", "--config", str(path), "--out", str(out)])

    # Assert
    assert code == 0
    pulse = json.loads((out / "pulse.json").read_text(encoding="utf-8"))
    assert set(pulse["provenance"]) == {"tool_version", "config_hash", "seed"}
    assert pulse["provenance"]["seed"] == 5
    assert pulse["n_segments"] == 5
    assert pulse["pair"] == [0, 1]
    assert pulse["infidelity"] < 1e-6
    assert (out / "rabi.svg").exists()
    assert (out / "iontrap.log").exists()


def test_gate_solve_is_reproducible(tmp_path: Path, write_config):
    path = write_config(_gate_config())

    main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "a")])
    main(["gate", "solve", "--config", str(path), "--out", str(tmp_path / "b")])

    first = (tmp_path / "a" / "pulse.json").read_text(encoding="utf-8")
    second = (tmp_path / "b" / "pulse.json").read_text(encoding="utf-8")
    assert first == second


def test_seed_flag_overrides_config_seed(tmp_path: Path, write_config):
    path = write_config(_gate_config())
    out = tmp_path / "out"

    main(["gate", "solve", "--config", str(path), "--out", str(out), "--seed", "9"])

    pulse = json.loads((out / "pulse.json").read_text(encoding="utf-8"))
    assert pulse["provenance"]["seed"] == 9


def test_gate_solve_with_detuning_list_writes_rabi_table(tmp_path: Path, write_config):
    path = write_config(_gate_config(mu_hz=[22.42e6, 22.43e6]))
    out = tmp_path / "out"

    code = main(["gate", "solve", "--config", str(path), "--out", str(out)])

    assert code == 0
    table = read_csv(out / "rabi.csv")
    assert list(table.columns) == ["mu_hz", "s1", "s2", "s3", "s4", "s5"]
    assert len(table) == 2


# -- Pruebas para gate sweep --

def test_gate_sweep_writes_csv_with_provenance(tmp_path: Path, write_config):
    # Arrange
    sweep = {"start_hz": 22.42e6, "stop_hz": 22.42e6 + 4.0, "step_hz": 2.0}
    path = write_config(_gate_config(sweep=sweep))
    out = tmp_path / "out"

    # Act
    code = main(["gate", "sweep", "--config", str(path), "--out", str(out), "--threads", "2"])

    # Assert
    assert code == 0
    provenance = _provenance_line(out / "sweep.csv")
    assert provenance["seed"] == 5
    frame = read_csv(out / "sweep.csv")
    assert len(frame) == 3
    assert frame["feasible"].all()
    assert (out / "infidelity.svg").exists()


def test_gate_sweep_requires_sweep_block(tmp_path: Path, write_config):
    path = write_config(_gate_config())

    assert main(["gate", "sweep", "--config", str(path), "--out", str(tmp_path / "out")]) == 2


# -- Pruebas para simulate --

def test_simulate_reports_lost_ion(tmp_path: Path, write_config):
    # Arrange: un ion muy caliente en el pozo 5 escapa hacia la superficie o fuera de la caja
    path = write_config({
        "layout": str(RUNS.parent / "layouts" / "twelve_well_ca.json"),
        "species": "Ca40",
        "seed": 1,
        "sim": {
            "ions_per_well": [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
            "n_steps": 2000,
            "settle_steps": 0,
            "temperature": 1.0e6,
        },
    })
    out = tmp_path / "out"

    # Act
    code = main(["simulate", "--config", str(path), "--out", str(out)])

    # Assert
    assert code == 3
    report = json.loads((out / "loss_report.json").read_text(encoding="utf-8"))
    assert report["ion"] == 0
    assert report["time_s"] > 0
