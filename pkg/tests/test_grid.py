"""Grid construction, spectral derivatives, quadrature, normalization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qring.grid import WaveField, integrate, make_grid, normalize, second_derivative

from conftest import plane_wave


class TestMakeGrid:
    def test_eight_point_layout(self):
        g = make_grid(8)
        assert g.n_points == 8
        assert g.spacing == pytest.approx(0.7853981633974483, abs=0.0)
        assert g.points[0] == pytest.approx(-math.pi, abs=0.0)
        assert g.points[5] == pytest.approx(0.7853981633974483, rel=1e-15)
        # standard FFT ordering with the Nyquist bin stored positive
        assert list(g.wavenumbers) == [0, 1, 2, 3, 4, -3, -2, -1]

    def test_points_strictly_increasing_and_in_range(self):
        g = make_grid(128)
        assert np.all(np.diff(g.points) > 0)
        assert g.points[0] == -math.pi
        assert g.points[-1] < math.pi

    @pytest.mark.parametrize("bad", [0, 4, 6, 7, 9, 511])
    def test_rejects_small_or_odd(self, bad):
        with pytest.raises(ValueError, match="unsupported grid size"):
            make_grid(bad)

    def test_arrays_read_only(self):
        g = make_grid(16)
        with pytest.raises(ValueError):
            g.points[0] = 0.0
        with pytest.raises(ValueError):
            g.wavenumbers[0] = 5

    def test_wavenumber_set_symmetric_in_square(self):
        g = make_grid(32)
        k = np.sort(g.wavenumbers**2)
        # every squared wavenumber except 0 and Nyquist appears twice
        assert k[0] == 0
        assert k[-1] == (32 // 2) ** 2
        assert np.count_nonzero(k == 1) == 2


class TestSecondDerivative:
    @pytest.mark.parametrize("k", [1, 3, -2])
    def test_fourier_eigenfunctions(self, grid64, k):
        f = plane_wave(grid64, k)
        d2 = second_derivative(f)
        assert np.allclose(d2, -(k**2) * f.amplitudes, atol=1e-10)

    def test_constant_mode(self, grid64):
        f = WaveField(np.full(64, 1.0 / math.sqrt(2 * math.pi), dtype=complex), grid64)
        assert np.allclose(second_derivative(f), 0.0, atol=1e-10)

    def test_linearity(self, grid64):
        f = plane_wave(grid64, 2)
        h = plane_wave(grid64, 5)
        combo = WaveField(3.0 * f.amplitudes - 1j * h.amplitudes, grid64)
        lhs = second_derivative(combo)
        rhs = 3.0 * second_derivative(f) - 1j * second_derivative(h)
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestIntegrate:
    def test_normalized_plane_wave(self, grid64):
        f = plane_wave(grid64, 1)
        assert integrate(np.abs(f.amplitudes) ** 2, grid64) == pytest.approx(1.0, abs=1e-12)

    def test_zeros(self, grid64):
        assert integrate(np.zeros(64), grid64) == 0.0

    def test_cos_squared_is_pi(self, grid256):
        vals = np.cos(grid256.points) ** 2
        assert integrate(vals, grid256) == pytest.approx(math.pi, abs=1e-10)

    def test_length_mismatch(self, grid64):
        with pytest.raises(ValueError, match="length mismatch"):
            integrate(np.zeros(63), grid64)

    @settings(max_examples=30, deadline=None)
    @given(scale=st.floats(-5.0, 5.0, allow_nan=False))
    def test_scaling_linearity(self, scale):
        g = make_grid(32)
        vals = np.sin(g.points) + 2.0
        assert integrate(scale * vals, g) == pytest.approx(scale * integrate(vals, g), rel=1e-12, abs=1e-12)


class TestNormalize:
    def test_unit_norm_after(self, grid64):
        f = WaveField(np.exp(-(grid64.points**2)) * (1.0 + 0.5j), grid64)
        assert normalize(f).norm() == pytest.approx(1.0, abs=1e-14)

    def test_zero_field_rejected(self, grid64):
        with pytest.raises(ValueError, match="degenerate field"):
            normalize(WaveField(np.zeros(64, dtype=complex), grid64))

    def test_nonfinite_rejected(self, grid64):
        amp = np.ones(64, dtype=complex)
        amp[3] = np.nan
        with pytest.raises(ValueError, match="degenerate field"):
            normalize(WaveField(amp, grid64))

    def test_input_untouched(self, grid64):
        amp = np.full(64, 2.0 + 0.0j)
        f = WaveField(amp, grid64)
        normalize(f)
        assert np.all(f.amplitudes == 2.0 + 0.0j)
