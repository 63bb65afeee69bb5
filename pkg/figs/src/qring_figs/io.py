"""Readers for the simulator's CSV outputs.

The simulator writes every table with a ``# manifest=<hash>`` first
line; the hash identifies the (command, code version, config) that
produced the run, and ``manifest.json`` in the same directory records
it again. Everything here parses those files back into float arrays
and enforces that the inputs of one figure come from one run. No
physics is recomputed: figures are pure functions of the CSV text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FigureInputError(Exception):
    """Missing, malformed, or cross-run figure input."""


@dataclass(frozen=True)
class Table:
    """One parsed CSV: the manifest hash it carries plus named columns."""

    path: Path
    manifest: str
    columns: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise FigureInputError(
                f"{self.path}: missing column {name!r} (has: {', '.join(self.columns)})"
            ) from None

    @property
    def n_rows(self) -> int:
        return next(iter(self.columns.values())).size


def read_table(path) -> Table:
    """Parse one manifest-headed CSV; every cell becomes a float."""
    path = Path(path)
    if not path.is_file():
        raise FigureInputError(f"input not found: {path}")
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# manifest="):
        raise FigureInputError(f"{path}: first line is not a '# manifest=' header")
    manifest = lines[0].split("=", 1)[1].strip()
    if len(lines) < 2 or not lines[1].strip():
        raise FigureInputError(f"{path}: missing column header line")
    names = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    if not rows:
        raise FigureInputError(f"{path}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(names):
            raise FigureInputError(
                f"{path}: row {i + 1} has {len(row)} cells, expected {len(names)}"
            )
    try:
        data = np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    except ValueError as err:
        raise FigureInputError(f"{path}: non-numeric cell ({err})") from None
    return Table(
        path=path,
        manifest=manifest,
        columns={name: data[:, j].copy() for j, name in enumerate(names)},
    )


def run_manifest_hash(directory) -> str | None:
    """Hash recorded in a run directory's manifest.json, if present."""
    path = Path(directory) / "manifest.json"
    if not path.is_file():
        return None
    try:
        return json.loads(path.read_text())["manifest_hash"]
    except (json.JSONDecodeError, KeyError) as err:
        raise FigureInputError(f"{path}: unreadable manifest ({err})") from None


def require_single_run(tables, expected: str | None = None) -> str:
    """All tables (and the directory manifest, when given) must agree."""
    hashes = {t.manifest for t in tables}
    if expected is not None:
        hashes.add(expected)
    if len(hashes) > 1:
        detail = ", ".join(f"{t.path.name}={t.manifest[:12]}" for t in tables)
        if expected is not None:
            detail += f", manifest.json={expected[:12]}"
        raise FigureInputError(f"inputs mix runs, manifest hashes differ: {detail}")
    return next(iter(hashes))


@dataclass(frozen=True)
class SnapshotGrid:
    """Long-format snapshot rows regrouped into (time, theta) frames."""

    times: np.ndarray  # (n_times,)
    theta: np.ndarray  # (n_theta,)
    frames: dict[str, np.ndarray]  # field -> (n_times, n_theta)


def snapshot_grid(table: Table, fields) -> SnapshotGrid:
    """Reshape frame-major snapshot rows; reject ragged or shuffled input."""
    time = table["time"]
    theta = table["theta"]
    changes = np.flatnonzero(time != time[0])
    n_theta = int(changes[0]) if changes.size else time.size
    if time.size % n_theta:
        raise FigureInputError(f"{table.path}: ragged snapshot frames")
    n_times = time.size // n_theta
    t2 = time.reshape(n_times, n_theta)
    th2 = theta.reshape(n_times, n_theta)
    if not ((t2 == t2[:, :1]).all() and (th2 == th2[:1, :]).all()):
        raise FigureInputError(f"{table.path}: snapshot rows are not frame-major")
    frames = {f: table[f].reshape(n_times, n_theta).copy() for f in fields}
    return SnapshotGrid(times=t2[:, 0].copy(), theta=th2[0].copy(), frames=frames)
