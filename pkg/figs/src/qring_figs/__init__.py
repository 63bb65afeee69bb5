"""Figure scripts for the ring-measurement simulator's CSV outputs."""

from .figures import FigureSpec, Style, plot_born, plot_evolution, plot_potential, plot_snapshot
from .io import FigureInputError, Table, read_table, run_manifest_hash, snapshot_grid

__version__ = "0.1.0"

__all__ = [
    "FigureInputError",
    "FigureSpec",
    "Style",
    "Table",
    "plot_born",
    "plot_evolution",
    "plot_potential",
    "plot_snapshot",
    "read_table",
    "run_manifest_hash",
    "snapshot_grid",
    "__version__",
]
