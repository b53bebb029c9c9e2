import numpy as np
import pytest

from nlacoustics.core import Axis, Field, Grid, ModelParams


@pytest.fixture
def nondim_params():
    return ModelParams(rho0=1.0, c=1.0, gamma=1.4, nu=0.0, eps=0.1, period_L=1.0)


@pytest.fixture
def line_grid():
    """64-point periodic unit interval."""
    return Grid((Axis("x", 64, 1.0 / 64, periodic=True),))


@pytest.fixture
def plane_grid():
    """64 x 32 periodic box, unit lengths."""
    return Grid(
        (
            Axis("x", 64, 1.0 / 64, periodic=True),
            Axis("y", 32, 1.0 / 32, periodic=True),
        )
    )


def random_bandlimited(grid, rng, kmax=6, zero_mean=True, axis_names=None):
    """Smooth random periodic field built from a handful of low modes."""
    names = axis_names or [a.name for a in grid.field_axes]
    vals = np.zeros(grid.shape)
    coords = np.meshgrid(
        *[grid.coords(a.name) for a in grid.field_axes], indexing="ij"
    )
    for _ in range(8):
        ks = [rng.integers(0 if not zero_mean else 1, kmax + 1) for _ in names]
        amp = rng.normal()
        phase = rng.uniform(0, 2 * np.pi)
        arg = sum(
            2 * np.pi * k * x / grid.axis(nm).length
            for k, x, nm in zip(ks, coords, names)
        )
        vals += amp * np.sin(arg + phase)
    if zero_mean:
        vals -= vals.mean()
    return Field(grid, vals)
