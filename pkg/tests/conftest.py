"""Shared helpers for the test suite."""

import numpy as np
import pytest

from qring.grid import Grid, WaveField, make_grid, normalize


@pytest.fixture
def grid64() -> Grid:
    return make_grid(64)


@pytest.fixture
def grid256() -> Grid:
    return make_grid(256)


def reflect(values: np.ndarray) -> np.ndarray:
    """Reflect a sampled function theta -> -theta on the periodic grid.

    theta_j = -pi + j h maps to theta_{(n-j) mod n}, which is
    index-reversal followed by a roll of one.
    """
    return np.roll(values[::-1], 1)


def plane_wave(g: Grid, k: int) -> WaveField:
    amp = np.exp(1j * k * g.points) / np.sqrt(2.0 * np.pi)
    return WaveField(amp.astype(np.complex128), g)


def gaussian_field(g: Grid, center: float, width2: float, momentum: float = 0.0) -> WaveField:
    amp = np.exp(-((g.points - center) ** 2) / (2.0 * width2)) * np.exp(
        1j * momentum * g.points
    )
    return normalize(WaveField(amp.astype(np.complex128), g))
