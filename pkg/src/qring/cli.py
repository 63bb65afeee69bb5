"""Command-line entry point: reproducible runs, sweeps, and regime checks.

Configuration is flat ``key = value`` text with dotted sections
(model.*, trigger.*, evolve.*, sweep.*, ...); every key has a default,
a config file overrides defaults, ``--set key=value`` and the dedicated
flags override the file. The fully resolved configuration, the code
version, and the master seed are hashed into a manifest id that every
CSV output carries in its header comment, so downstream plots can
refuse to mix runs.

Exit codes: 0 ok, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .ensemble import TrialConfig, born_deviation, build_initial_state, run_trial, sweep
from .grid import make_grid
from .init import trial_seed
from .integrator import BlowUpError, EvolveConfig, evolve
from .measurement import (
    Side,
    TimescaleParams,
    check_collective_condition,
    check_trigger_condition,
    classify,
    timescale_window,
)
from .model import MeanFieldNorm, ModelParams, background_potential, order_variable, readout_sign

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration schema

def _p_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _p_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError as err:
        raise ConfigError(f"expected an integer, got {text!r}") from err


def _p_float(text: str) -> float:
    try:
        return float(text.strip())
    except ValueError as err:
        raise ConfigError(f"expected a number, got {text!r}") from err


def _p_str(text: str) -> str:
    return text.strip()


def _p_floatlist(text: str) -> tuple[float, ...]:
    items = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if not items:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}")
    return tuple(_p_float(t) for t in items)


def _p_meanfield(text: str) -> str:
    low = text.strip().lower()
    if low not in ("over_n", "over_n_plus_1"):
        raise ConfigError(f"meanfield_norm must be over_n or over_n_plus_1, got {text!r}")
    return low


_DEFAULT_SIN2_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)

# key -> (parser, default)
_SCHEMA: dict[str, tuple[Callable, object]] = {
    "seed": (_p_int, 12345),
    "threads": (_p_int, 0),  # 0 = all available cores
    "out_dir": (_p_str, "qring-out"),
    "grid.n_points": (_p_int, 512),
    "model.hbar": (_p_float, 0.02),
    "model.mass": (_p_float, 1.0),
    "model.lambda": (_p_float, -0.15),
    "model.n_apparatus": (_p_int, 100),
    "model.s2": (_p_float, 0.1),
    "model.sigma": (_p_float, 0.1),
    "model.meanfield_norm": (_p_meanfield, "over_n_plus_1"),
    "model.include_system_in_meanfield": (_p_bool, True),
    "model.potential_on": (_p_bool, True),
    "trigger.enabled": (_p_bool, True),
    "trigger.alpha": (_p_float, 0.0),
    "trigger.delta_theta": (_p_float, math.sqrt(0.1)),
    "trigger.p0": (_p_float, 0.0),
    "evolve.dt": (_p_float, 5.0e-4),
    "evolve.t_final": (_p_float, 24.0),
    "evolve.snapshot_every": (_p_int, 200),
    "evolve.diagnostics_every": (_p_int, 200),
    "classify.margin": (_p_float, 0.2),
    "measure.a": (_p_float, math.pi / 2.0),
    "sweep.sin2_grid": (_p_floatlist, _DEFAULT_SIN2_GRID),
    "sweep.trials_per_alpha": (_p_int, 100),
    "sweep.mirror_pairing": (_p_bool, True),
}


def parse_config_file(path: str) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment; blanks ignored."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = body.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def resolve_config(
    file_pairs: dict[str, str], overrides: dict[str, str]
) -> dict[str, object]:
    """Defaults <- config file <- overrides, every value typed."""
    config = {key: default for key, (_, default) in _SCHEMA.items()}
    for source in (file_pairs, overrides):
        for key, text in source.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key: {key}")
            parser, _ = _SCHEMA[key]
            config[key] = parser(text) if isinstance(text, str) else text
    return config


def _model_params(config: dict) -> ModelParams:
    try:
        return ModelParams(
            hbar=config["model.hbar"],
            mass=config["model.mass"],
            coupling=config["model.lambda"],
            n_apparatus=config["model.n_apparatus"],
            s2=config["model.s2"],
            sigma=config["model.sigma"],
            meanfield_norm=MeanFieldNorm(config["model.meanfield_norm"]),
            include_system_in_meanfield=config["model.include_system_in_meanfield"],
            potential_on=config["model.potential_on"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _trial_config(config: dict) -> TrialConfig:
    try:
        evolve_cfg = EvolveConfig(
            dt=config["evolve.dt"],
            t_final=config["evolve.t_final"],
            snapshot_every=config["evolve.snapshot_every"],
            diagnostics_every=config["evolve.diagnostics_every"],
        )
        if not 0.0 <= config["classify.margin"] < 1.0:
            raise ValueError("classify.margin must lie in [0, 1)")
        if config["grid.n_points"] < 8 or config["grid.n_points"] % 2:
            raise ValueError(f"unsupported grid size: {config['grid.n_points']}")
        return TrialConfig(
            model=_model_params(config),
            evolve=evolve_cfg,
            n_points=config["grid.n_points"],
            delta_theta=config["trigger.delta_theta"],
            p0=config["trigger.p0"],
            margin=config["classify.margin"],
            with_system=config["trigger.enabled"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


# ---------------------------------------------------------------------------
# serialization: 17-significant-digit floats everywhere

def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def json_dumps(obj, indent: int = 0, _level: int = 0) -> str:
    """JSON with floats at 17 significant digits (NaN/inf become null)."""
    pad = " " * (indent * (_level + 1)) if indent else ""
    end_pad = " " * (indent * _level) if indent else ""
    sep = ",\n" if indent else ", "
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return "null"
        return _fmt_float(v)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [json_dumps(v, indent, _level + 1) for v in obj]
        if indent:
            return "[\n" + sep.join(pad + it for it in items) + "\n" + end_pad + "]"
        return "[" + sep.join(items) + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{json.dumps(str(k))}: {json_dumps(v, indent, _level + 1)}" for k, v in obj.items()
        ]
        if indent:
            return "{\n" + sep.join(pad + it for it in items) + "\n" + end_pad + "}"
        return "{" + sep.join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_csv(path: Path, manifest_hash: str, columns: list[str], rows) -> None:
    with path.open("w") as fh:
        fh.write(f"# manifest={manifest_hash}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append(_fmt_float(float(v)))
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


# where results are written and how many workers run them cannot change
# the numbers, so these keys stay out of the manifest hash: reruns in a
# different directory or thread count must produce byte-identical tables
_HASH_EXCLUDED = ("out_dir", "threads")


def compute_manifest_hash(command: str, config: dict) -> str:
    hashed = {k: v for k, v in config.items() if k not in _HASH_EXCLUDED}
    payload = json_dumps(
        {"command": command, "code_version": __version__, "config": _config_dict(hashed)}
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _config_dict(config: dict) -> dict:
    out = {}
    for key in sorted(config):
        v = config[key]
        out[key] = list(v) if isinstance(v, tuple) else v
    return out


def write_manifest(
    out_dir: Path, command: str, config: dict, manifest_hash: str, outputs: dict[str, str]
) -> None:
    manifest = {
        "command": command,
        "code_version": __version__,
        "master_seed": config["seed"],
        "manifest_hash": manifest_hash,
        "config": _config_dict(config),
        "outputs": outputs,
        # informational; excluded from the hash so reruns stay comparable
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json_dumps(manifest, indent=2) + "\n")


# ---------------------------------------------------------------------------
# commands

def _resolve_out_dir(args, config: dict) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    env = os.environ.get("QRING_OUT_DIR")
    if env:
        return Path(env)
    return Path(config["out_dir"])


def _require_attractive(config: dict) -> None:
    if not config["model.lambda"] < 0:
        raise ConfigError(
            f"measurement run requires attractive coupling, model.lambda = {config['model.lambda']}"
        )


def cmd_run(args, config: dict) -> int:
    """One trial: snapshots, diagnostics, trial record, potential dump."""
    _require_attractive(config)
    cfg = _trial_config(config)
    out_dir = _resolve_out_dir(args, config)
    mhash = compute_manifest_hash("run", config)
    alpha = config["trigger.alpha"]
    if cfg.with_system and not 0.0 <= alpha <= math.pi / 2.0:
        raise ConfigError(f"trigger.alpha must lie in [0, pi/2], got {alpha}")

    master_seed = config["seed"]
    seed = trial_seed(master_seed, 0)
    state, draw = build_initial_state(cfg, alpha, seed)
    grid = state.grid

    snapshots: list[tuple[float, np.ndarray, Optional[np.ndarray]]] = []

    def observer(t: float, phi2: np.ndarray, rho_sys: Optional[np.ndarray]) -> None:
        snapshots.append((t, phi2.copy(), None if rho_sys is None else rho_sys.copy()))

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "potential": "potential.csv",
        "snapshots": "snapshots.csv",
        "diagnostics": "diagnostics.csv",
        "trial_record": "trial_record.json",
    }

    v0 = background_potential(grid, cfg.model)
    write_csv(
        out_dir / "potential.csv",
        mhash,
        ["theta", "v0"],
        zip(grid.points, v0),
    )

    try:
        final, log = evolve(state, cfg.model, cfg.evolve, observer=observer)
    except BlowUpError as err:
        error_record = {
            "error": "numerical blow-up",
            "message": str(err),
            "step_index": err.step_index,
            "time": err.time,
        }
        (out_dir / "error.json").write_text(json_dumps(error_record, indent=2) + "\n")
        outputs["error"] = "error.json"
        write_manifest(out_dir, "run", config, mhash, outputs)
        print(json_dumps(error_record), file=sys.stderr)
        return EXIT_NUMERICAL

    snap_columns = ["time", "theta", "phi2"]
    if cfg.with_system:
        snap_columns += ["psi0_density", "psi0_initial_density"]
        rho0_initial = snapshots[0][2]

    def snapshot_rows():
        for t, phi2, rho_sys in snapshots:
            for j in range(grid.n_points):
                row = [t, grid.points[j], phi2[j]]
                if cfg.with_system:
                    row += [rho_sys[j], rho0_initial[j]]
                yield row

    write_csv(out_dir / "snapshots.csv", mhash, snap_columns, snapshot_rows())
    write_csv(
        out_dir / "diagnostics.csv",
        mhash,
        ["time", "energy", "norm_error"],
        zip(log.times, log.energy, log.norm_error),
    )

    phi2_final = order_variable(final, for_readout=True)
    reading = readout_sign(phi2_final, grid)
    meter_fraction = (reading + 1.0) / 2.0
    if meter_fraction > 0.5 + cfg.margin / 2.0:
        meter_side = Side.POSITIVE
    elif meter_fraction < 0.5 - cfg.margin / 2.0:
        meter_side = Side.NEGATIVE
    else:
        meter_side = Side.UNDECIDED
    record = {
        "master_seed": master_seed,
        "trial_index": 0,
        "alpha": alpha if cfg.with_system else None,
        "outcome": classify(final, cfg.margin).to_dict() if cfg.with_system else None,
        "meter": {"reading": reading, "side": meter_side.value},
        "energy_drift": log.energy_drift(),
        "norm_drift": log.norm_drift(),
        "final_dt": log.final_dt,
        "tighten_events": [list(ev) for ev in log.tighten_events],
        "draw": draw.to_dict(),
    }
    (out_dir / "trial_record.json").write_text(json_dumps(record, indent=2) + "\n")
    write_manifest(out_dir, "run", config, mhash, outputs)

    print(f"run: wrote {out_dir} (manifest {mhash[:12]})")
    print(
        f"run: energy_drift = {log.energy_drift():.3e}, norm_drift = {log.norm_drift():.3e}, "
        f"meter = {meter_side.value} ({reading:+.3f})"
    )
    return EXIT_OK


def cmd_sweep(args, config: dict) -> int:
    """Born-rule frequency sweep over alpha."""
    _require_attractive(config)
    if not config["trigger.enabled"]:
        raise ConfigError("sweep requires trigger.enabled = true")
    trials = config["sweep.trials_per_alpha"]
    if trials < 1:
        raise ConfigError(f"sweep.trials_per_alpha must be >= 1, got {trials}")
    cfg = _trial_config(config)
    if args.alpha is not None:
        if not 0.0 <= config["trigger.alpha"] <= math.pi / 2.0:
            raise ConfigError(f"trigger.alpha must lie in [0, pi/2], got {config['trigger.alpha']}")
        alphas = [config["trigger.alpha"]]
    else:
        for v in config["sweep.sin2_grid"]:
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"sweep.sin2_grid values must lie in [0, 1], got {v}")
        alphas = [math.asin(math.sqrt(v)) for v in config["sweep.sin2_grid"]]
    out_dir = _resolve_out_dir(args, config)
    mhash = compute_manifest_hash("sweep", config)

    threads = config["threads"]
    table, records = sweep(
        cfg,
        alphas,
        trials,
        config["seed"],
        threads=threads if threads > 0 else -1,
        mirror_pairing=config["sweep.mirror_pairing"],
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = {"frequency_table": "frequency_table.csv", "trials": "trials.jsonl"}
    write_csv(
        out_dir / "frequency_table.csv",
        mhash,
        list(table.COLUMNS),
        ([getattr(row, c) for c in table.COLUMNS] for row in table.rows),
    )
    with (out_dir / "trials.jsonl").open("w") as fh:
        for rec in records:
            fh.write(json_dumps(rec.to_dict()) + "\n")
    write_manifest(out_dir, "sweep", config, mhash, outputs)

    n_failed = sum(1 for r in records if r.failed)
    print(f"sweep: wrote {out_dir} (manifest {mhash[:12]})")
    for row in table.rows:
        print(
            f"sweep: sin2_alpha = {row.sin2_alpha:.3f}  freq_negative = {row.freq_negative:.3f}  "
            f"error_fraction = {row.error_fraction:.3f}  ({row.trials} trials)"
        )
    if len(table.rows) >= 3:
        dev = born_deviation(table)
        print(
            f"sweep: born max_abs = {dev['max_abs']:.3f}, rms = {dev['rms']:.3f}, "
            f"monotone = {dev['monotone']}"
        )
    if n_failed:
        print(f"sweep: {n_failed} failed trials counted as undecided", file=sys.stderr)
    return EXIT_OK


def cmd_check(args, config: dict) -> int:
    """Print regime-condition reports without running dynamics."""
    cfg = _trial_config(config)
    p = cfg.model
    reports = [check_collective_condition(p), check_trigger_condition(p)]
    seed = trial_seed(config["seed"], 0)
    state, _ = build_initial_state(cfg, config["trigger.alpha"], seed)
    ts = TimescaleParams.from_state(state, p, a=config["measure.a"])
    reports.append(timescale_window(ts, p, t_measure=config["evolve.t_final"]))
    for report in reports:
        for line in report.lines():
            print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qring",
        description="Collective-meter measurement model on a ring: runs, sweeps, regime checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "one trial with snapshot/diagnostic series"),
        ("sweep", "Born-rule frequency sweep over alpha"),
        ("check", "print regime-condition reports (no dynamics)"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="path to key=value config file")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--alpha", type=float, default=None, help="trigger angle in radians")
        cmd.add_argument("--trials", type=int, default=None, help="trials per alpha (sweep)")
        cmd.add_argument("--threads", type=int, default=None)
        cmd.add_argument("--out-dir", default=None)
        cmd.add_argument("--grid-points", type=int, default=None)
        cmd.add_argument("--dt", type=float, default=None)
        cmd.add_argument("--t-final", type=float, default=None)
        cmd.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="generic config override, repeatable",
        )
    return parser


_FLAG_KEYS = {
    "seed": "seed",
    "alpha": "trigger.alpha",
    "trials": "sweep.trials_per_alpha",
    "threads": "threads",
    "grid_points": "grid.n_points",
    "dt": "evolve.dt",
    "t_final": "evolve.t_final",
}


def _collect_overrides(args) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = repr(value) if not isinstance(value, str) else value
    return overrides


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        file_pairs = parse_config_file(args.config) if args.config else {}
        config = resolve_config(file_pairs, _collect_overrides(args))
        handler = {"run": cmd_run, "sweep": cmd_sweep, "check": cmd_check}[args.command]
        return handler(args, config)
    except ConfigError as err:
        print(json_dumps({"error": "config", "message": str(err)}), file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as err:
        print(
            json_dumps({"error": "numerical", "message": str(err), "step_index": err.step_index}),
            file=sys.stderr,
        )
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
