"""
Escritura de artefactos (JSON, CSV y SVG) con procedencia embebida.

Cada archivo lleva {tool_version, config_hash, seed} para que una ejecución se
pueda reproducir y comparar byte a byte.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd
from loguru import logger
from matplotlib import pyplot as plt
from matplotlib.figure import Figure

from .. import __version__ as TOOL_VERSION
from ..context import RunConfig


def _to_builtin(value: Any):
    """Convierte tipos de numpy a tipos nativos para json.dump."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Tipo no serializable: {type(value).__name__}")


def config_hash(config: RunConfig) -> str:
    """
    SHA-256 del volcado JSON canónico de la configuración y de los bytes de cada
    archivo de datos referenciado.
    """
    digest = hashlib.sha256()
    dump = config.model_dump(mode="json", exclude={"output_dir", "source_path"})
    digest.update(json.dumps(dump, sort_keys=True, separators=(",", ":")).encode("utf-8"))
    for path in config.referenced_files():
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


class ArtifactWriter:
    """
    Escribe los artefactos de un comando en un directorio de salida.
    """

    def __init__(self, out_dir: Union[str, Path], config_hash: str, seed: int, tool_version: str = TOOL_VERSION):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.seed = int(seed)
        self.tool_version = tool_version

    @property
    def provenance(self) -> dict:
        return {"tool_version": self.tool_version, "config_hash": self.config_hash, "seed": self.seed}

    def write_json(self, name: str, payload: dict) -> Path:
        """Guarda `payload` con un objeto `provenance` en la raíz."""
        path = self.out_dir / name
        document = {"provenance": self.provenance, **payload}
        with open(path, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=2, default=_to_builtin, ensure_ascii=False)
            f.write("\n")
        logger.success(f"JSON guardado en {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame, index: bool = False) -> Path:
        """Guarda el DataFrame precedido por la línea de comentario de procedencia."""
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# provenance: {json.dumps(self.provenance, sort_keys=True)}\n")
            frame.to_csv(f, index=index, float_format="%.12g", lineterminator="\n")
        logger.success(f"CSV guardado en {path} ({len(frame)} filas)")
        return path

    def write_svg(self, name: str, fig: Figure) -> Path:
        """Guarda la figura como SVG determinista y la cierra."""
        path = self.out_dir / name
        metadata = {"Date": None, "Description": json.dumps(self.provenance, sort_keys=True)}
        with plt.rc_context({"svg.hashsalt": self.config_hash}):
            fig.savefig(path, format="svg", metadata=metadata)
        plt.close(fig)
        logger.success(f"Figura guardada en {path}")
        return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Lee un CSV escrito por ArtifactWriter ignorando la línea de procedencia."""
    return pd.read_csv(path, comment="#")
