import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlacoustics.core import Axis, Field, Grid, field_l2_norm
from nlacoustics.errors import GridMismatch, NonzeroMean
from nlacoustics import spectral
from nlacoustics.spectral import (
    antiderivative_zero_mean,
    d_dx,
    dealiased_square,
    periodic_axis,
)

from conftest import random_bandlimited


@pytest.fixture
def ax(line_grid):
    return periodic_axis(line_grid, "x")


def _axis_profile(grid, k, name, func):
    x = grid.coords(name)
    L = grid.axis(name).length
    line = func(2 * np.pi * k * x / L)
    shape = [1] * len(grid.shape)
    shape[grid.axis_index(name)] = len(x)
    return Field(grid, np.broadcast_to(line.reshape(shape), grid.shape).copy())


def sine(grid, k, name="x"):
    return _axis_profile(grid, k, name, np.sin)


def cosine(grid, k, name="x"):
    return _axis_profile(grid, k, name, np.cos)


class TestDerivative:
    def test_first_derivative_of_sine(self, line_grid, ax):
        L = 1.0
        out = d_dx(sine(line_grid, 1), ax, 1)
        expect = (2 * np.pi / L) * cosine(line_grid, 1).values
        np.testing.assert_allclose(out.values, expect, atol=1e-12 * 2 * np.pi)

    def test_constant_annihilated(self, line_grid, ax):
        f = Field(line_grid, np.full(64, 3.7))
        for order in (1, 2, 3):
            assert np.max(np.abs(d_dx(f, ax, order).values)) < 1e-12

    def test_third_derivative_of_sine(self, line_grid, ax):
        out = d_dx(sine(line_grid, 1), ax, 3)
        expect = -((2 * np.pi) ** 3) * cosine(line_grid, 1).values
        np.testing.assert_allclose(out.values, expect, atol=1e-10 * (2 * np.pi) ** 3)

    def test_resolved_harmonic_relative_error(self, line_grid, ax):
        # no algebraic truncation error on band-limited data
        k = 7
        out = d_dx(sine(line_grid, k), ax, 1)
        expect = (2 * np.pi * k) * cosine(line_grid, k).values
        rel = np.max(np.abs(out.values - expect)) / np.max(np.abs(expect))
        assert rel < 1e-11

    def test_zero_mean_preserved_exactly(self, line_grid, ax):
        rng = np.random.default_rng(3)
        f = Field(line_grid, rng.normal(size=64))
        out = d_dx(f, ax, 1)
        assert abs(np.mean(out.values)) < 1e-13 * np.max(np.abs(f.values))

    def test_grid_mismatch(self, plane_grid, ax):
        f = Field(plane_grid, np.zeros((64, 32)))
        ax_y = periodic_axis(plane_grid, "y")
        bad = spectral.PeriodicAxisHandle(ax_y.axis_index, 16, 1.0)
        with pytest.raises(GridMismatch):
            d_dx(f, bad, 1)

    def test_second_axis(self, plane_grid):
        ay = periodic_axis(plane_grid, "y")
        f = sine(plane_grid, 2, "y")
        out = d_dx(f, ay, 2)
        expect = -((2 * np.pi * 2) ** 2) * f.values
        np.testing.assert_allclose(out.values, expect, atol=1e-9)


class TestAntiderivative:
    def test_cosine(self, line_grid, ax):
        out = antiderivative_zero_mean(cosine(line_grid, 1), ax)
        expect = (1.0 / (2 * np.pi)) * sine(line_grid, 1).values
        np.testing.assert_allclose(out.values, expect, atol=1e-13)

    def test_zero(self, line_grid, ax):
        out = antiderivative_zero_mean(Field(line_grid, np.zeros(64)), ax)
        assert np.all(out.values == 0.0)

    def test_nonzero_mean_rejected(self, line_grid, ax):
        with pytest.raises(NonzeroMean):
            antiderivative_zero_mean(Field(line_grid, np.ones(64)), ax)

    def test_derivative_roundtrip(self, line_grid, ax):
        rng = np.random.default_rng(11)
        f = random_bandlimited(line_grid, rng, kmax=10)
        back = d_dx(antiderivative_zero_mean(f, ax), ax, 1)
        assert np.max(np.abs(back.values - f.values)) < 1e-11 * np.max(np.abs(f.values))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_antiderivative_of_derivative_is_identity_minus_mean(self, seed):
        grid = Grid((Axis("x", 64, 1.0 / 64, periodic=True),))
        handle = periodic_axis(grid, "x")
        rng = np.random.default_rng(seed)
        f = random_bandlimited(grid, rng, kmax=20, zero_mean=False)
        out = antiderivative_zero_mean(d_dx(f, handle, 1), handle)
        expect = f.values - np.mean(f.values)
        assert np.max(np.abs(out.values - expect)) < 1e-10 * max(
            1.0, np.max(np.abs(f.values))
        )

    def test_output_mean_is_zero(self, line_grid, ax):
        rng = np.random.default_rng(5)
        f = random_bandlimited(line_grid, rng)
        out = antiderivative_zero_mean(f, ax)
        assert abs(np.mean(out.values)) < 1e-14


class TestDealiasedSquare:
    def test_constant(self, line_grid, ax):
        f = Field(line_grid, np.full(64, 2.0))
        np.testing.assert_allclose(
            dealiased_square(f, ax).values, np.full(64, 4.0), atol=1e-13
        )

    def test_trig_identity_when_product_resolved(self, line_grid, ax):
        # sin^2(kx) = (1 - cos(2kx))/2 survives the filter when 2k <= n//3
        k = 8  # 2k = 16 <= 21 = 64//3
        f = sine(line_grid, k)
        out = dealiased_square(f, ax)
        expect = (1.0 - cosine(line_grid, 2 * k).values) / 2.0
        np.testing.assert_allclose(out.values, expect, atol=1e-12)

    def test_energy_contraction(self, line_grid, ax):
        rng = np.random.default_rng(23)
        f = Field(line_grid, rng.normal(size=64))
        filtered = dealiased_square(f, ax)
        raw = Field(line_grid, f.values * f.values)
        assert field_l2_norm(filtered) <= field_l2_norm(raw) + 1e-12

    def test_high_modes_removed(self, line_grid, ax):
        k = 20  # above the 2/3 cutoff of 21? below; 2k aliases without the filter
        f = sine(line_grid, k)
        out = dealiased_square(f, ax)
        hat = np.fft.rfft(out.values)
        assert np.max(np.abs(hat[64 // 3 + 1 :])) < 1e-10


class TestParseval:
    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_physical_norm_equals_mode_energy(self, seed):
        grid = Grid((Axis("x", 64, 1.0 / 64, periodic=True),))
        rng = np.random.default_rng(seed)
        f = random_bandlimited(grid, rng, zero_mean=False)
        n = 64
        hat = np.fft.rfft(f.values)
        weights = np.full(n // 2 + 1, 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0  # even n: Nyquist appears once
        mode_energy = np.sum(weights * np.abs(hat) ** 2) / n**2
        phys = field_l2_norm(f) ** 2  # grid length is 1
        assert phys == pytest.approx(mode_energy, rel=1e-12, abs=1e-14)
