"""Regime-condition checks, the tunneling time-scale window, and outcome
classification for one measurement run.

The regime checks are diagnostics only: they tell you whether the
parameter point should behave as a measurement device (collective mode
forms, trigger moves the meter, meter is classical on the measurement
time scale) without running any dynamics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, SystemState, order_variable, readout_sign, total_energy

__all__ = [
    "ConditionReport",
    "TimescaleParams",
    "Side",
    "Outcome",
    "check_collective_condition",
    "check_trigger_condition",
    "timescale_window",
    "classify",
]


@dataclass(frozen=True)
class ConditionReport:
    """One named check with its numbers, serializable as key = value text."""

    name: str
    passed: bool
    values: dict

    def lines(self) -> list[str]:
        out = [f"{self.name}.passed = {str(self.passed).lower()}"]
        for key, val in self.values.items():
            if isinstance(val, bool):
                text = str(val).lower()
            elif isinstance(val, float):
                text = format(val, ".17g")
            else:
                text = str(val)
            out.append(f"{self.name}.{key} = {text}")
        return out


class Side(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Outcome:
    """Where the system particle and the meter ended up."""

    system_side: Side
    meter_side: Side
    consistent: bool
    system_mass_positive: float
    meter_reading: float

    def to_dict(self) -> dict:
        return {
            "system_side": self.system_side.value,
            "meter_side": self.meter_side.value,
            "consistent": self.consistent,
            "system_mass_positive": self.system_mass_positive,
            "meter_reading": self.meter_reading,
        }


@dataclass(frozen=True)
class TimescaleParams:
    """Inputs of the tunneling time-scale estimate.

    delta_E is the typical energy per particle; with attractive
    coupling the realized E(0) can be negative, in which case it is
    clamped to zero and flagged rather than rejected.
    """

    delta_E: float
    a: float = math.pi / 2.0
    clamped: bool = False

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValueError("a must be positive")
        if self.delta_E < 0:
            raise ValueError("delta_E must be nonnegative (clamp before constructing)")

    @staticmethod
    def from_state(state: SystemState, p: ModelParams, a: float = math.pi / 2.0) -> "TimescaleParams":
        """Typical energy per particle from the realized initial state."""
        e0 = total_energy(state, p)
        per_particle = e0 / state.fields.shape[0]
        if per_particle < 0:
            return TimescaleParams(delta_E=0.0, a=a, clamped=True)
        return TimescaleParams(delta_E=per_particle, a=a)


def _v0_slope(theta: float) -> float:
    """d/dtheta cos^2(theta) = -sin(2 theta)."""
    return -math.sin(2.0 * theta)


def check_collective_condition(p: ModelParams) -> ConditionReport:
    """Does the attractive mean field beat dispersion and the background
    tilt, sigma^2/(2m) + |sigma V0'(sigma)| < |lambda|/2, so a localized
    collective mode can form?"""
    lhs = p.sigma**2 / (2.0 * p.mass) + abs(p.sigma * _v0_slope(p.sigma))
    rhs = abs(p.coupling) / 2.0 if p.coupling < 0 else 0.0
    return ConditionReport(
        name="collective_condition",
        passed=lhs < rhs,
        values={"lhs": lhs, "rhs": rhs, "sigma": p.sigma, "coupling": p.coupling},
    )


def check_trigger_condition(p: ModelParams) -> ConditionReport:
    """Is the trigger's pull on the order variable comparable to the
    coupling: (sigma/sqrt(N)) V0'(sigma/sqrt(N)) vs lambda.

    The literal inequality compares two negative numbers whose
    direction is puzzling (a tiny negative slope is 'less than' any
    sizable negative lambda only when |lambda| is *small*), so the
    report carries the raw comparison and the magnitude comparison
    side by side; ``passed`` follows the magnitude reading.
    """
    arg = p.sigma / math.sqrt(p.n_apparatus)
    lhs = arg * _v0_slope(arg)
    raw_pass = lhs < p.coupling
    magnitude_pass = abs(lhs) < abs(p.coupling)
    return ConditionReport(
        name="trigger_condition",
        passed=magnitude_pass,
        values={
            "lhs": lhs,
            "rhs": p.coupling,
            "raw_pass": raw_pass,
            "magnitude_lhs": abs(lhs),
            "magnitude_rhs": abs(p.coupling),
            "magnitude_pass": magnitude_pass,
        },
    )


def timescale_window(ts: TimescaleParams, p: ModelParams, t_measure: float) -> ConditionReport:
    """Tunneling time scales t_single = exp(sqrt(m dE/2) a / hbar) and
    t_collective = exp(sqrt(N m dE/2) a / hbar); the meter is classical
    but the system settles when t_collective >> t_measure > t_single,
    with >> read as a factor >= 100.

    Computed in log space; the reported exponentials can be inf for
    large N without breaking the comparison.
    """
    if t_measure <= 0:
        raise ValueError("t_measure must be positive")
    base = math.sqrt(p.mass * ts.delta_E / 2.0) * ts.a / p.hbar
    log_t_single = base
    log_t_collective = math.sqrt(p.n_apparatus) * base
    log_tm = math.log(t_measure)
    upper_ok = log_t_collective >= math.log(100.0) + log_tm
    lower_ok = log_tm > log_t_single
    window_empty = log_t_collective <= log_t_single
    return ConditionReport(
        name="timescale_window",
        passed=upper_ok and lower_ok,
        values={
            "t_single": math.exp(log_t_single) if log_t_single < 700 else math.inf,
            "t_collective": math.exp(log_t_collective) if log_t_collective < 700 else math.inf,
            "t_measure": t_measure,
            "log_t_single": log_t_single,
            "log_t_collective": log_t_collective,
            "log_ratio": log_t_collective - log_t_single,
            # factored form of the same ratio, exp((sqrt(N)-1) sqrt(m dE/2) a/hbar)
            "log_ratio_factored": (math.sqrt(p.n_apparatus) - 1.0) * base,
            "delta_E": ts.delta_E,
            "delta_E_clamped": ts.clamped,
            "a": ts.a,
            "upper_ok": upper_ok,
            "lower_ok": lower_ok,
            "window_empty": window_empty,
        },
    )


def _positive_mass(rho: np.ndarray, grid) -> float:
    """Probability mass on theta > 0 with the theta = 0 and theta = -pi
    samples split half/half, so mass(+) + mass(-) = 1 exactly and a grid
    reflection swaps the two masses exactly."""
    n = grid.n_points
    w = np.zeros(n)
    w[n // 2 + 1 :] = 1.0
    w[0] = 0.5
    w[n // 2] = 0.5
    return float(grid.spacing * np.sum(w * rho))


def _threshold(fraction: float, margin: float) -> Side:
    if fraction > 0.5 + margin / 2.0:
        return Side.POSITIVE
    if fraction < 0.5 - margin / 2.0:
        return Side.NEGATIVE
    return Side.UNDECIDED


def classify(state: SystemState, margin: float) -> Outcome:
    """Which side the system particle and the meter each settled on.

    system side from P+ = mass of |psi_0|^2 on theta > 0, meter side
    from the readout B mapped to (B+1)/2, both with a dead band of
    +/- margin/2 around 1/2 (UNDECIDED inside the band).
    """
    if not 0.0 <= margin < 1.0:
        raise ValueError("margin must lie in [0, 1)")
    if not state.has_system:
        raise ValueError("classification requires a system particle")
    rho_sys = np.abs(state.fields[0]) ** 2
    p_plus = _positive_mass(rho_sys, state.grid)
    system_side = _threshold(p_plus, margin)
    phi2 = order_variable(state, for_readout=True)
    reading = readout_sign(phi2, state.grid)
    meter_side = _threshold((reading + 1.0) / 2.0, margin)
    consistent = (
        system_side == meter_side
        and system_side is not Side.UNDECIDED
    )
    return Outcome(
        system_side=system_side,
        meter_side=meter_side,
        consistent=consistent,
        system_mass_positive=p_plus,
        meter_reading=reading,
    )
