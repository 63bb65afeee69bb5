"""Periodic discretization of the ring, spectral differentiation, quadrature.

The angular coordinate lives on theta in [-pi, pi) sampled uniformly.
Because the domain is periodic with period 2*pi, wavenumbers are integers
and derivatives are computed spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "WaveField",
    "make_grid",
    "second_derivative",
    "integrate",
    "normalize",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-pi, pi).

    Attributes
    ----------
    n_points : int
        Number of samples (even, >= 8).
    spacing : float
        2*pi / n_points.
    points : np.ndarray
        theta_j = -pi + j * spacing, strictly increasing.
    wavenumbers : np.ndarray
        Integer DFT wavenumbers in standard FFT ordering
        (0, 1, ..., n/2, -(n/2-1), ..., -1); the Nyquist mode is
        stored as +n/2.
    """

    n_points: int
    spacing: float
    points: np.ndarray
    wavenumbers: np.ndarray

    def __post_init__(self) -> None:
        self.points.setflags(write=False)
        self.wavenumbers.setflags(write=False)


@dataclass
class WaveField:
    """One particle's complex amplitudes on a grid, unit L2 norm."""

    amplitudes: np.ndarray
    grid: Grid

    def norm(self) -> float:
        """L2 norm over the ring, sqrt(integral |psi|^2 dtheta)."""
        return float(
            np.sqrt(self.grid.spacing * np.sum(np.abs(self.amplitudes) ** 2))
        )


def make_grid(n_points: int) -> Grid:
    """Build the uniform periodic grid.

    Odd sizes are rejected: they break the symmetric wavenumber layout
    assumed by the kinetic propagator.
    """
    if n_points < 8 or n_points % 2 != 0:
        raise ValueError(f"unsupported grid size: {n_points}")
    spacing = 2.0 * np.pi / n_points
    points = -np.pi + spacing * np.arange(n_points)
    wavenumbers = np.fft.fftfreq(n_points, d=1.0 / n_points).astype(np.int64)
    # fftfreq labels the Nyquist bin -n/2; the bin is its own conjugate
    # partner, so only k^2 ever matters and +n/2 keeps the set symmetric.
    wavenumbers[n_points // 2] = n_points // 2
    return Grid(n_points=n_points, spacing=spacing, points=points, wavenumbers=wavenumbers)


def second_derivative(f: WaveField) -> np.ndarray:
    """Spectral d^2/dtheta^2: transform, multiply by -k^2, transform back."""
    k = f.grid.wavenumbers
    return np.fft.ifft(-(k.astype(np.float64) ** 2) * np.fft.fft(f.amplitudes))


def integrate(values: np.ndarray, g: Grid) -> float:
    """Quadrature on the periodic grid: spacing * sum(values).

    The rectangle rule is spectrally accurate for periodic integrands,
    so no higher-order weights are needed.
    """
    if len(values) != g.n_points:
        raise ValueError(
            f"length mismatch: {len(values)} values on a {g.n_points}-point grid"
        )
    return float(g.spacing * np.sum(values))


def normalize(f: WaveField) -> WaveField:
    """Return a copy of f scaled to unit L2 norm."""
    nrm = f.norm()
    if nrm == 0.0 or not np.isfinite(nrm):
        raise ValueError("degenerate field")
    return WaveField(amplitudes=f.amplitudes / nrm, grid=f.grid)
