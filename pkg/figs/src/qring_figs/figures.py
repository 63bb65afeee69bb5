"""Render figures from parsed simulator tables.

Every renderer puts the CSV arrays on the artists untouched — no
rescaling, offsets, or recomputation — so a figure can be audited by
comparing artist data against the CSV columns it came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # batch scripts, never a display

import matplotlib.pyplot as plt
import numpy as np

from .io import FigureInputError, Table, read_table, require_single_run, snapshot_grid


@dataclass(frozen=True)
class Style:
    figsize: tuple[float, float] = (6.4, 4.2)
    dpi: int = 150
    heat_cmap: str = "magma"
    line_color: str = "tab:blue"
    marker_color: str = "black"
    # outcome-frequency roles: red = negative-outcome frequency,
    # green = meter/system disagreement
    freq_color: str = "tab:red"
    error_color: str = "tab:green"
    system_color: str = "tab:blue"
    meter_color: str = "tab:orange"
    initial_color: str = "gray"


@dataclass(frozen=True)
class FigureSpec:
    """One figure: id, input CSVs (one run only), output image, styling."""

    figure_id: int
    inputs: tuple[Path, ...]
    out: Path
    style: Style = field(default_factory=Style)
    expect_manifest: str | None = None

    def __post_init__(self):
        if not 1 <= self.figure_id <= 6:
            raise FigureInputError(f"figure_id must be 1..6, got {self.figure_id}")
        if not self.inputs:
            raise FigureInputError("figure needs at least one input CSV")

    def load(self) -> list[Table]:
        tables = [read_table(p) for p in self.inputs]
        require_single_run(tables, expected=self.expect_manifest)
        return tables


def _save(fig, spec: FigureSpec) -> None:
    Path(spec.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=spec.style.dpi)


def plot_potential(spec: FigureSpec):
    """Background potential with its stable/unstable points marked."""
    (table,) = spec.load()
    theta = table["theta"]
    v0 = table["v0"]
    st = spec.style
    fig, ax = plt.subplots(figsize=st.figsize)
    ax.plot(theta, v0, color=st.line_color, label="background potential")
    lo, hi = float(v0.min()), float(v0.max())
    band = 1e-9 * (hi - lo if hi > lo else 1.0)
    minima = theta[v0 <= lo + band]
    maxima = theta[v0 >= hi - band]
    ax.plot(minima, np.full(minima.size, lo), "v", color=st.marker_color,
            linestyle="none", label="stable points")
    ax.plot(maxima, np.full(maxima.size, hi), "^", color=st.marker_color,
            linestyle="none", label="unstable points")
    ax.set_xlabel("theta")
    ax.set_ylabel("V0(theta)")
    ax.legend()
    _save(fig, spec)
    return fig


def plot_evolution(spec: FigureSpec):
    """Heatmap of the order variable phi2 over (theta, time)."""
    (table,) = spec.load()
    snap = snapshot_grid(table, ["phi2"])
    st = spec.style
    fig, ax = plt.subplots(figsize=st.figsize)
    image = ax.imshow(
        snap.frames["phi2"],
        origin="lower",
        aspect="auto",
        interpolation="nearest",
        cmap=st.heat_cmap,
        extent=(float(snap.theta[0]), float(snap.theta[-1]),
                float(snap.times[0]), float(snap.times[-1])),
    )
    fig.colorbar(image, ax=ax, label="phi2")
    ax.set_xlabel("theta")
    ax.set_ylabel("time")
    _save(fig, spec)
    return fig


def plot_snapshot(spec: FigureSpec):
    """Final system density and order variable over the initial density."""
    (table,) = spec.load()
    if "psi0_density" not in table.columns or "psi0_initial_density" not in table.columns:
        raise FigureInputError(
            f"{table.path}: no system columns (psi0_density, psi0_initial_density); "
            "this figure needs a run with the triggered particle"
        )
    snap = snapshot_grid(table, ["phi2", "psi0_density", "psi0_initial_density"])
    st = spec.style
    fig, ax = plt.subplots(figsize=st.figsize)
    ax.plot(snap.theta, snap.frames["psi0_initial_density"][0], "--",
            color=st.initial_color, label="initial |psi0|^2")
    ax.plot(snap.theta, snap.frames["psi0_density"][-1],
            color=st.system_color, label="final |psi0|^2")
    ax.plot(snap.theta, snap.frames["phi2"][-1],
            color=st.meter_color, label="final phi2")
    ax.set_xlabel("theta")
    ax.set_ylabel("density")
    ax.set_title(f"t = {snap.times[-1]:g}")
    ax.legend()
    _save(fig, spec)
    return fig


def plot_born(spec: FigureSpec):
    """Outcome frequencies against sin^2(alpha), with the Born-rule line."""
    (table,) = spec.load()
    x = table["sin2_alpha"]
    freq = table["freq_negative"]
    err = table["error_fraction"]
    st = spec.style
    fig, ax = plt.subplots(figsize=st.figsize)
    ax.plot([0.0, 1.0], [0.0, 1.0], "--", color="black", label="Born rule")
    ax.plot(x, freq, "o-", color=st.freq_color, label="frequency of negative outcome")
    ax.plot(x, err, "s-", color=st.error_color, label="error fraction")
    ax.set_xlabel("sin^2(alpha)")
    ax.set_ylabel("frequency")
    ax.set_xlim(-0.05, 1.05)
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    _save(fig, spec)
    return fig
