"""Physical model ingredients: potentials, order variable, mean field, energy.

Every particle moves on the ring in the background potential
V0(theta) = cos^2(theta) and feels the mean field of the others through
the order variable phi^2(theta), the average single-particle density.
The coupling is attractive (lambda < 0), which is what lets the cloud
condense into one valley and act as a meter.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import Grid, WaveField

__all__ = [
    "MeanFieldNorm",
    "ModelParams",
    "SystemState",
    "background_potential",
    "order_variable",
    "hartree_potential",
    "total_energy",
    "readout_sign",
]


class MeanFieldNorm(enum.Enum):
    """Divisor convention for the order variable once the system particle
    joins the sum: the true average (N+1 fields / N+1) or the literal
    apparatus normalization (N+1 fields / N)."""

    OVER_N = "over_n"
    OVER_N_PLUS_1 = "over_n_plus_1"


@dataclass(frozen=True)
class ModelParams:
    """Physical constants and sampling parameters.

    ``coupling`` is the mean-field strength lambda; it must be negative
    (attractive) for any measurement run. The default sits in the
    weak-binding band where the cloud collapses into a single compact
    blob without ejecting a halo and the long-horizon energy drift at
    the default timestep stays two orders under budget; stronger values
    (to about -0.5) are supported but collapse violently. ``s2`` is the
    initial packet variance s^2; ``sigma`` the dispersion of the random
    packet centers and momenta.
    """

    hbar: float = 0.02
    mass: float = 1.0
    coupling: float = -0.15
    n_apparatus: int = 100
    s2: float = 0.1
    sigma: float = 0.1
    meanfield_norm: MeanFieldNorm = MeanFieldNorm.OVER_N_PLUS_1
    include_system_in_meanfield: bool = True
    potential_on: bool = True

    def __post_init__(self) -> None:
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.n_apparatus < 1:
            raise ValueError("n_apparatus must be >= 1")
        if self.s2 <= 0:
            raise ValueError("s2 must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def require_attractive(self) -> None:
        """Measurement runs need lambda < 0; reject anything else."""
        if not self.coupling < 0:
            raise ValueError(
                f"measurement run requires attractive coupling, got {self.coupling}"
            )


@dataclass
class SystemState:
    """All wavefunctions at one instant, stored as a stacked array.

    ``fields`` has shape (n_fields, n_points). When ``has_system`` is
    true, row 0 is the measured (system) particle and rows 1..N are the
    apparatus; otherwise every row is apparatus.
    """

    fields: np.ndarray
    grid: Grid
    time: float = 0.0
    has_system: bool = False

    @property
    def n_apparatus(self) -> int:
        return self.fields.shape[0] - (1 if self.has_system else 0)

    @property
    def apparatus(self) -> list[WaveField]:
        start = 1 if self.has_system else 0
        return [WaveField(self.fields[i], self.grid) for i in range(start, self.fields.shape[0])]

    @property
    def system(self) -> Optional[WaveField]:
        if not self.has_system:
            return None
        return WaveField(self.fields[0], self.grid)

    def densities(self) -> np.ndarray:
        return np.abs(self.fields) ** 2

    def copy(self) -> "SystemState":
        return SystemState(
            fields=self.fields.copy(),
            grid=self.grid,
            time=self.time,
            has_system=self.has_system,
        )


def background_potential(g: Grid, p: ModelParams) -> np.ndarray:
    """V0(theta_j) = cos^2(theta_j); zeros when the potential is switched
    off (test hook for free-evolution oracles)."""
    if not p.potential_on:
        return np.zeros(g.n_points)
    return np.cos(g.points) ** 2


def _meanfield_members(state: SystemState, p: ModelParams) -> tuple[int, int]:
    """Rows participating in the mean-field sum and the divisor M.

    Returns (start_row, M). The system row joins the sum only when
    present and include_system_in_meanfield is set; M then follows the
    meanfield_norm convention, otherwise M is the apparatus count.
    """
    if state.has_system and p.include_system_in_meanfield:
        start = 0
        n_members = state.fields.shape[0]
        m = n_members if p.meanfield_norm is MeanFieldNorm.OVER_N_PLUS_1 else state.n_apparatus
    else:
        start = 1 if state.has_system else 0
        m = state.n_apparatus
    return start, m


def order_variable(
    state: SystemState, p: Optional[ModelParams] = None, for_readout: bool = False
) -> np.ndarray:
    """phi^2(theta) = (1/M) sum_k |psi_k(theta)|^2.

    With ``for_readout`` the sum runs over the apparatus only with
    M = N: the meter is read from the apparatus regardless of whether
    the system particle feeds the dynamical mean field. Params are only
    consulted for the dynamical (non-readout) convention.
    """
    rho = state.densities()
    if for_readout:
        if state.n_apparatus == 0:
            raise ValueError("readout requested on a state with zero apparatus particles")
        start = 1 if state.has_system else 0
        return rho[start:].sum(axis=0) / state.n_apparatus
    if p is None:
        raise ValueError("ModelParams required for the dynamical order variable")
    start, m = _meanfield_members(state, p)
    return rho[start:].sum(axis=0) / m


def hartree_potential(i: int, state: SystemState, p: ModelParams) -> np.ndarray:
    """Mean-field potential felt by particle i: lambda*(phi^2 - rho_i/M),
    the self-term removed when i participates in the sum.

    A system row excluded from the mean field still feels the apparatus
    mean field lambda*phi^2 (one-way coupling); there is no self-term to
    subtract because it never contributed to the sum.
    """
    if not 0 <= i < state.fields.shape[0]:
        raise IndexError(f"particle index {i} out of range")
    rho = state.densities()
    start, m = _meanfield_members(state, p)
    s = rho[start:].sum(axis=0)
    if i >= start:
        return p.coupling * (s - rho[i]) / m
    return p.coupling * s / m


def total_energy(state: SystemState, p: ModelParams) -> float:
    """Kinetic + external + pairwise Hartree energy.

    E = sum_i int [ (hbar^2/2m)|dpsi_i|^2 + V0 rho_i ] dtheta
        + (lambda/2M) sum_{i != k, members} int rho_i rho_k dtheta

    The pairwise sum excludes self-interaction and halves the double
    counting, which is exactly the functional conserved by the coupled
    equations of motion. When the system particle is excluded from the
    mean field its one-way coupling energy lambda int phi^2 rho_0 is
    added; that variant is not a conserved quantity and is kept only so
    the diagnostic stays comparable across configurations.
    """
    g = state.grid
    rho = state.densities()
    hats = np.fft.fft(state.fields, axis=-1)
    k2 = g.wavenumbers.astype(np.float64) ** 2
    # Parseval: int |df|^2 dtheta = (spacing/n) * sum k^2 |fhat_k|^2
    kinetic = (
        (p.hbar**2 / (2.0 * p.mass))
        * (g.spacing / g.n_points)
        * float(np.sum(k2 * (hats.real**2 + hats.imag**2)))
    )
    v0 = background_potential(g, p)
    external = g.spacing * float(np.sum(v0 * rho.sum(axis=0)))
    start, m = _meanfield_members(state, p)
    s_m = rho[start:].sum(axis=0)
    pair = s_m**2 - (rho[start:] ** 2).sum(axis=0)
    interaction = (p.coupling / (2.0 * m)) * g.spacing * float(np.sum(pair))
    if start == 1:
        interaction += (p.coupling / m) * g.spacing * float(np.sum(s_m * rho[0]))
    return kinetic + external + interaction


def readout_sign(phi2: np.ndarray, g: Grid) -> float:
    """Scalar meter value B = int sign(theta) phi^2 dtheta in [-1, 1].

    The weight is built from grid indices, not float comparisons, so it
    is exactly odd under the reflection j <-> n-j: zero at theta = 0 and
    at the antipode theta = -pi, +1 strictly right, -1 strictly left.
    """
    n = g.n_points
    s = np.zeros(n)
    s[n // 2 + 1 :] = 1.0
    s[1 : n // 2] = -1.0
    return float(g.spacing * np.sum(s * phi2))
