"""One command per figure plus a make-all driver.

Inputs are the simulator CLI's output directories: a run directory
(potential.csv, snapshots.csv, manifest.json) or a sweep directory
(frequency_table.csv, manifest.json). Each command checks the CSV
manifest hashes against the directory's manifest.json, so a file
copied in from another run is refused.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib.pyplot as plt

from .figures import FigureSpec, Style, plot_born, plot_evolution, plot_potential, plot_snapshot
from .io import FigureInputError, run_manifest_hash

EXIT_OK = 0
EXIT_INPUT = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="output image path")
    parser.add_argument("--dpi", type=int, default=None, help="saved-image resolution")


def _style(args) -> Style:
    return Style(dpi=args.dpi) if args.dpi else Style()


def _run_spec(figure_id: int, run_dir: Path, csv_name: str, default_out: str, args) -> FigureSpec:
    return FigureSpec(
        figure_id=figure_id,
        inputs=(run_dir / csv_name,),
        out=Path(args.out) if args.out else run_dir / default_out,
        style=_style(args),
        expect_manifest=run_manifest_hash(run_dir),
    )


def _render(plot, spec: FigureSpec) -> int:
    try:
        fig = plot(spec)
    except FigureInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    plt.close(fig)
    print(f"wrote {spec.out}")
    return EXIT_OK


def main_potential(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Plot the background potential from a run directory."
    )
    parser.add_argument("--run-dir", required=True)
    _add_common(parser)
    args = parser.parse_args(argv)
    spec = _run_spec(1, Path(args.run_dir), "potential.csv", "fig1_potential.png", args)
    return _render(plot_potential, spec)


def main_evolution(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Heatmap of the order variable over time from a run directory."
    )
    parser.add_argument("--run-dir", required=True)
    _add_common(parser)
    args = parser.parse_args(argv)
    spec = _run_spec(2, Path(args.run_dir), "snapshots.csv", "fig2_evolution.png", args)
    return _render(plot_evolution, spec)


def main_snapshot(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Overlay final system density, order variable, and initial density."
    )
    parser.add_argument("--run-dir", required=True)
    _add_common(parser)
    args = parser.parse_args(argv)
    spec = _run_spec(3, Path(args.run_dir), "snapshots.csv", "fig3_snapshot.png", args)
    return _render(plot_snapshot, spec)


def main_born(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Outcome frequencies against sin^2(alpha) from a sweep directory."
    )
    parser.add_argument("--sweep-dir", required=True)
    _add_common(parser)
    args = parser.parse_args(argv)
    sweep_dir = Path(args.sweep_dir)
    spec = FigureSpec(
        figure_id=6,
        inputs=(sweep_dir / "frequency_table.csv",),
        out=Path(args.out) if args.out else sweep_dir / "fig6_frequencies.png",
        style=_style(args),
        expect_manifest=run_manifest_hash(sweep_dir),
    )
    return _render(plot_born, spec)


def main_all(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render every figure available from run/sweep directories."
    )
    parser.add_argument(
        "--run-dir", action="append", default=[],
        help="simulation run directory; repeat for extra snapshot figures (max 3)",
    )
    parser.add_argument("--sweep-dir", default=None, help="frequency-sweep directory")
    parser.add_argument("--out-dir", default=None, help="image directory (default: first input dir)")
    parser.add_argument("--dpi", type=int, default=None, help="saved-image resolution")
    args = parser.parse_args(argv)

    run_dirs = [Path(d) for d in args.run_dir]
    if not run_dirs and args.sweep_dir is None:
        parser.error("need at least one --run-dir or a --sweep-dir")
    if len(run_dirs) > 3:
        parser.error("at most 3 run directories (snapshot figures 3-5)")
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.run_dir[0] if run_dirs else args.sweep_dir)
    style = Style(dpi=args.dpi) if args.dpi else Style()

    jobs = []
    if run_dirs:
        first = run_dirs[0]
        jobs.append((plot_potential, FigureSpec(
            figure_id=1, inputs=(first / "potential.csv",),
            out=out_dir / "fig1_potential.png", style=style,
            expect_manifest=run_manifest_hash(first))))
        jobs.append((plot_evolution, FigureSpec(
            figure_id=2, inputs=(first / "snapshots.csv",),
            out=out_dir / "fig2_evolution.png", style=style,
            expect_manifest=run_manifest_hash(first))))
    for k, run in enumerate(run_dirs):
        jobs.append((plot_snapshot, FigureSpec(
            figure_id=3 + k, inputs=(run / "snapshots.csv",),
            out=out_dir / f"fig{3 + k}_snapshot.png", style=style,
            expect_manifest=run_manifest_hash(run))))
    if args.sweep_dir is not None:
        sweep = Path(args.sweep_dir)
        jobs.append((plot_born, FigureSpec(
            figure_id=6, inputs=(sweep / "frequency_table.csv",),
            out=out_dir / "fig6_frequencies.png", style=style,
            expect_manifest=run_manifest_hash(sweep))))

    status = EXIT_OK
    for plot, spec in jobs:
        code = _render(plot, spec)
        status = status or code
    return status
