"""Seeded construction of apparatus and system initial wavefunctions.

Apparatus particles start as Gaussian packets near the unstable point
theta = 0, with centers xi_i and momenta xi_i' drawn from Gaussian(0,
sigma^2). The system (trigger) particle starts as a two-Gaussian
superposition whose mixing angle alpha sets the Born-rule target
sin^2(alpha) for the NEGATIVE outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, WaveField, normalize
from .model import ModelParams

__all__ = [
    "TriggerParams",
    "RandomDraw",
    "sample_apparatus_initial",
    "system_initial",
    "trial_seed",
]

# Centers beyond this are redrawn: the packets are meant to sit "very
# near" the unstable point, and an unwrapped Gaussian center must stay
# well inside the ring chart.
CENTER_REJECT_LIMIT = math.pi / 4.0


@dataclass(frozen=True)
class TriggerParams:
    """Mixing angle and packet shape of the system particle.

    alpha in [0, pi/2]: alpha = 0 puts all weight on the right packet
    (+1/2), alpha = pi/2 on the left packet (-1/2). delta_theta is the
    Gaussian width; p0 an optional momentum kick (+p0 on the left
    packet, -p0 on the right, i.e. inward for p0 > 0).
    """

    alpha: float = 0.0
    delta_theta: float = math.sqrt(0.1)
    p0: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= math.pi / 2.0:
            raise ValueError(f"alpha must lie in [0, pi/2], got {self.alpha}")
        if self.delta_theta <= 0:
            raise ValueError("delta_theta must be positive")


@dataclass
class RandomDraw:
    """The random numbers behind one apparatus sample, kept for replay."""

    seed: int
    xi: np.ndarray
    xi_prime: np.ndarray
    n_rejected: int = 0
    negated: bool = False

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "xi": [float(x) for x in self.xi],
            "xi_prime": [float(x) for x in self.xi_prime],
            "n_rejected": int(self.n_rejected),
            "negated": bool(self.negated),
        }


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Independent per-trial seed keyed by (master_seed, trial_index).

    The derived integer alone regenerates the trial's draws, so it can
    be stored in the trial record for exact replay.
    """
    seq = np.random.SeedSequence(entropy=[int(master_seed), int(trial_index)])
    return int(seq.generate_state(1, np.uint64)[0])


def _gaussian_packet(grid: Grid, center: float, width2: float, momentum: float) -> WaveField:
    theta = grid.points
    amp = np.exp(-((theta - center) ** 2) / (2.0 * width2)) * np.exp(1j * momentum * theta)
    return normalize(WaveField(amp.astype(np.complex128), grid))


def sample_apparatus_initial(
    p: ModelParams,
    grid: Grid,
    seed: int,
    negate: bool = False,
) -> tuple[list[WaveField], RandomDraw]:
    """Draw N apparatus packets psi_i ~ exp(-(theta-xi_i)^2/(2 s^2)) e^{i xi_i' theta}.

    xi_i, xi_i' ~ Gaussian(0, sigma^2). Centers with |xi_i| > pi/4 are
    rejected and redrawn (counted in the draw record) so packets stay
    near the unstable point without wrapping. With ``negate`` every
    draw is sign-flipped after sampling, which produces the exact
    mirror image ensemble for reflection tests.

    Returns the normalized fields and the RandomDraw that regenerates
    them.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))
    n = p.n_apparatus
    xi = np.empty(n)
    n_rejected = 0
    for i in range(n):
        while True:
            draw = rng.normal(0.0, p.sigma)
            if abs(draw) <= CENTER_REJECT_LIMIT:
                xi[i] = draw
                break
            n_rejected += 1
    xi_prime = rng.normal(0.0, p.sigma, size=n)
    if negate:
        xi = -xi
        xi_prime = -xi_prime
    fields = [_gaussian_packet(grid, xi[i], p.s2, xi_prime[i]) for i in range(n)]
    record = RandomDraw(
        seed=int(seed), xi=xi, xi_prime=xi_prime, n_rejected=n_rejected, negated=negate
    )
    return fields, record


def system_initial(t: TriggerParams, grid: Grid) -> WaveField:
    """Two-Gaussian trigger state, normalized:

    psi_0 ~ sin(alpha) exp(-(theta+1/2)^2/(2 dtheta^2)) e^{+i p0 theta}
          + cos(alpha) exp(-(theta-1/2)^2/(2 dtheta^2)) e^{-i p0 theta}
    """
    theta = grid.points
    w2 = t.delta_theta**2
    left = np.exp(-((theta + 0.5) ** 2) / (2.0 * w2)) * np.exp(1j * t.p0 * theta)
    right = np.exp(-((theta - 0.5) ** 2) / (2.0 * w2)) * np.exp(-1j * t.p0 * theta)
    amp = math.sin(t.alpha) * left + math.cos(t.alpha) * right
    return normalize(WaveField(amp.astype(np.complex128), grid))
