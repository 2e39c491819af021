import matplotlib

matplotlib.use("Agg")

from .artifacts import ArtifactWriter, config_hash, read_csv  # noqa: E402
from .plots import (  # noqa: E402
    potential_contour,
    interaction_heatmap,
    rabi_bars,
    rabi_heatmap,
    infidelity_curve,
    loss_curve,
)

__all__ = [
    "ArtifactWriter",
    "config_hash",
    "read_csv",
    "potential_contour",
    "interaction_heatmap",
    "rabi_bars",
    "rabi_heatmap",
    "infidelity_curve",
    "loss_curve",
]
