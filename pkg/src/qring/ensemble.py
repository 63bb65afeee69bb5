"""Repeated-trial harness and Born-rule frequency statistics.

One trial is init -> evolve -> classify under a per-trial RNG stream
derived from (master_seed, trial_index). A sweep reuses the same
trial_index stream across every alpha (common random numbers): the
trigger angle is then the only thing that differs between columns of
the frequency table, which sharpens monotonicity and mirror
comparisons without biasing any single-alpha marginal. By default each
row is also mirror-paired: half the trials rerun the other half's
streams with the cloud reflected, which turns the mirror identity
between alpha and pi/2 - alpha rows into an exact one.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .grid import make_grid
from .init import RandomDraw, TriggerParams, sample_apparatus_initial, system_initial, trial_seed
from .integrator import BlowUpError, EvolveConfig, evolve
from .measurement import Outcome, Side, classify
from .model import ModelParams, SystemState

__all__ = [
    "TrialConfig",
    "TrialRecord",
    "FrequencyRow",
    "FrequencyTable",
    "run_trial",
    "sweep",
    "born_deviation",
]


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs besides (alpha, seed)."""

    model: ModelParams = ModelParams()
    evolve: EvolveConfig = EvolveConfig()
    n_points: int = 512
    delta_theta: float = math.sqrt(0.1)
    p0: float = 0.0
    margin: float = 0.2
    with_system: bool = True


@dataclass
class TrialRecord:
    """Outcome and diagnostics of one seeded trial.

    wall_time is informational only and is excluded from serialized
    records so that replaying (master_seed, trial_index, config)
    reproduces the stored record bit-exactly.
    """

    master_seed: int
    trial_index: int
    alpha: float
    outcome: Optional[Outcome]
    energy_drift: float
    norm_drift: float
    wall_time: float
    draw: RandomDraw
    failed: bool = False
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "master_seed": int(self.master_seed),
            "trial_index": int(self.trial_index),
            "alpha": float(self.alpha),
            "sin2_alpha": float(math.sin(self.alpha) ** 2),
            "outcome": self.outcome.to_dict() if self.outcome is not None else None,
            "energy_drift": float(self.energy_drift),
            "norm_drift": float(self.norm_drift),
            "draw": self.draw.to_dict(),
            "failed": bool(self.failed),
            "error": self.error,
        }


def build_initial_state(
    cfg: TrialConfig, alpha: float, seed: int, negate: bool = False
) -> tuple[SystemState, RandomDraw]:
    """Assemble the stacked initial state for one trial (row 0 = system)."""
    grid = make_grid(cfg.n_points)
    fields, draw = sample_apparatus_initial(cfg.model, grid, seed, negate=negate)
    rows = [f.amplitudes for f in fields]
    if cfg.with_system:
        trig = TriggerParams(alpha=alpha, delta_theta=cfg.delta_theta, p0=cfg.p0)
        rows.insert(0, system_initial(trig, grid).amplitudes)
    stacked = np.ascontiguousarray(np.stack(rows))
    state = SystemState(fields=stacked, grid=grid, time=0.0, has_system=cfg.with_system)
    return state, draw


def run_trial(
    cfg: TrialConfig,
    alpha: float,
    master_seed: int,
    trial_index: int,
    negate: bool = False,
    seed_index: Optional[int] = None,
) -> TrialRecord:
    """One seeded end-to-end trial: init -> evolve -> classify.

    seed_index picks the RNG stream when it must differ from the
    trial's position (mirror-paired sweeps reuse the stream of the
    partner trial); default is trial_index itself. Numerical blow-up is
    recorded as a failed trial (outcome None, drift taken from the
    partial log) instead of crashing the sweep.
    """
    cfg.model.require_attractive()
    t0 = _time.perf_counter()
    seed = trial_seed(master_seed, trial_index if seed_index is None else seed_index)
    state, draw = build_initial_state(cfg, alpha, seed, negate=negate)
    try:
        final, log = evolve(state, cfg.model, cfg.evolve)
    except BlowUpError as err:
        partial = err.log
        return TrialRecord(
            master_seed=master_seed,
            trial_index=trial_index,
            alpha=alpha,
            outcome=None,
            energy_drift=partial.energy_drift() if partial else math.nan,
            norm_drift=partial.norm_drift() if partial else math.nan,
            wall_time=_time.perf_counter() - t0,
            draw=draw,
            failed=True,
            error=str(err),
        )
    outcome = classify(final, cfg.margin) if cfg.with_system else None
    return TrialRecord(
        master_seed=master_seed,
        trial_index=trial_index,
        alpha=alpha,
        outcome=outcome,
        energy_drift=log.energy_drift(),
        norm_drift=log.norm_drift(),
        wall_time=_time.perf_counter() - t0,
        draw=draw,
    )


@dataclass(frozen=True)
class FrequencyRow:
    alpha: float
    sin2_alpha: float
    trials: int
    n_negative: int
    n_positive: int
    n_undecided: int
    n_mismatch: int
    freq_negative: float
    freq_literal_caption: float
    error_fraction: float


@dataclass
class FrequencyTable:
    """Per-alpha aggregate counts.

    Trials partition by the system particle's side: n_negative +
    n_positive + n_undecided = trials (failed trials count as
    undecided). n_mismatch is the subset of decided trials whose meter
    disagreed or stayed undecided; freq_negative conditions on decided
    trials; freq_literal_caption is the raw fraction of trials found
    negative while the meter read positive.
    """

    rows: list[FrequencyRow] = field(default_factory=list)

    COLUMNS = (
        "alpha",
        "sin2_alpha",
        "trials",
        "n_negative",
        "n_positive",
        "n_undecided",
        "n_mismatch",
        "freq_negative",
        "freq_literal_caption",
        "error_fraction",
    )

    def column(self, name: str) -> list:
        return [getattr(row, name) for row in self.rows]


def _aggregate_alpha(alpha: float, records: list[TrialRecord]) -> FrequencyRow:
    trials = len(records)
    n_neg = n_pos = n_und = n_mis = n_literal = 0
    for rec in records:
        out = rec.outcome
        if rec.failed or out is None or out.system_side is Side.UNDECIDED:
            n_und += 1
            continue
        if out.system_side is Side.NEGATIVE:
            n_neg += 1
            if out.meter_side is Side.POSITIVE:
                n_literal += 1
        else:
            n_pos += 1
        if not out.consistent:
            n_mis += 1
    decided = n_neg + n_pos
    return FrequencyRow(
        alpha=alpha,
        sin2_alpha=math.sin(alpha) ** 2,
        trials=trials,
        n_negative=n_neg,
        n_positive=n_pos,
        n_undecided=n_und,
        n_mismatch=n_mis,
        freq_negative=(n_neg / decided) if decided else math.nan,
        freq_literal_caption=n_literal / trials if trials else math.nan,
        error_fraction=(n_mis + n_und) / trials if trials else math.nan,
    )


def _trial_plan(trials: int, mirror_pairing: bool) -> list[tuple[int, int, bool]]:
    """(trial_index, seed_index, negate) for one alpha row.

    With pairing, the second half of the row reruns the first half's
    streams with the cloud reflected. Reflected draws have the same
    distribution, so every marginal stays unbiased, but the paired rows
    at alpha and pi/2 - alpha become exact mirror images of each other:
    the mirror identity freq(alpha) + freq(pi/2 - alpha) = 1 then holds
    by construction instead of within sampling noise.
    """
    if not mirror_pairing:
        return [(t, t, False) for t in range(trials)]
    half = (trials + 1) // 2
    return [(t, t, False) if t < half else (t, t - half, True) for t in range(trials)]


def sweep(
    cfg: TrialConfig,
    alphas: list[float],
    trials_per_alpha: int,
    master_seed: int,
    threads: int = 1,
    negate: bool = False,
    mirror_pairing: bool = True,
) -> tuple[FrequencyTable, list[TrialRecord]]:
    """Run trials_per_alpha trials at every alpha and aggregate.

    Trials run on a joblib worker pool; per-trial streams depend only
    on (master_seed, seed plan), never on scheduling, and the fold is
    ordered by (alpha, trial_index), so any thread count produces the
    same table and records.
    """
    if trials_per_alpha < 1:
        raise ValueError("trials_per_alpha must be >= 1")
    plan = _trial_plan(trials_per_alpha, mirror_pairing)
    jobs = [(a_idx, alpha, t, s, neg) for a_idx, alpha in enumerate(alphas) for (t, s, neg) in plan]
    n_jobs = threads if threads >= 1 else -1
    records: list[TrialRecord] = Parallel(n_jobs=n_jobs, backend="loky")(
        delayed(run_trial)(cfg, alpha, master_seed, t, negate ^ neg, s)
        for (_, alpha, t, s, neg) in jobs
    )
    table = FrequencyTable()
    for a_idx, alpha in enumerate(alphas):
        chunk = records[a_idx * trials_per_alpha : (a_idx + 1) * trials_per_alpha]
        table.rows.append(_aggregate_alpha(alpha, chunk))
    return table, records


def born_deviation(table: FrequencyTable) -> dict:
    """Deviation of freq_negative from the Born line sin^2(alpha).

    Returns max_abs, rms, and whether freq_negative is nondecreasing in
    sin2_alpha. Rows with no decided trials are skipped (counted in
    n_skipped).
    """
    rows = sorted(table.rows, key=lambda r: r.sin2_alpha)
    if len(rows) < 3:
        raise ValueError("born_deviation needs at least 3 alpha rows")
    devs = []
    freqs = []
    n_skipped = 0
    for row in rows:
        if math.isnan(row.freq_negative):
            n_skipped += 1
            continue
        freqs.append(row.freq_negative)
        devs.append(row.freq_negative - row.sin2_alpha)
    monotone = all(b >= a - 1e-12 for a, b in zip(freqs, freqs[1:]))
    return {
        "max_abs": max((abs(d) for d in devs), default=math.nan),
        "rms": math.sqrt(sum(d * d for d in devs) / len(devs)) if devs else math.nan,
        "monotone": monotone,
        "n_skipped": n_skipped,
    }
