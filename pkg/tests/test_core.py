import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlacoustics.core import (
    Axis,
    ConservedState,
    Field,
    Grid,
    ModelParams,
    ProfileSolution,
    field_l2_norm,
    validate_params,
)
from nlacoustics.errors import (
    DomainExceeded,
    GridMismatch,
    NonFinite,
    NonPositiveDensity,
    ParamError,
)
from nlacoustics import snapshot

from conftest import random_bandlimited


class TestValidateParams:
    def test_water_scale_ok(self):
        p = ModelParams(rho0=1000.0, c=1500.0, gamma=1.4, nu=0.001, eps=1e-5, period_L=1.0)
        assert validate_params(p) is p

    def test_eps_zero_rejected(self):
        with pytest.raises(ParamError) as err:
            validate_params(ModelParams(eps=0.0))
        assert err.value.name == "eps"

    def test_eps_one_rejected(self):
        with pytest.raises(ParamError):
            validate_params(ModelParams(eps=1.0))

    def test_gamma_boundary_rejected(self):
        with pytest.raises(ParamError) as err:
            validate_params(ModelParams(gamma=1.0))
        assert err.value.name == "gamma"

    def test_negative_nu_rejected(self):
        with pytest.raises(ParamError):
            validate_params(ModelParams(nu=-1e-3))

    def test_idempotent(self, nondim_params):
        once = validate_params(nondim_params)
        assert validate_params(once) == nondim_params


class TestGrid:
    def test_power_of_two_enforced_on_periodic(self):
        with pytest.raises(ParamError):
            Axis("x", 48, 0.1, periodic=True)
        Axis("x", 48, 0.1, periodic=False)  # aperiodic axes are unconstrained

    def test_min_points(self):
        with pytest.raises(ParamError):
            Axis("x", 3, 0.1)

    def test_single_evolution_axis(self):
        with pytest.raises(ParamError):
            Grid((Axis("t", 8, 0.1, evolution=True), Axis("z", 8, 0.1, evolution=True)))

    def test_shape_excludes_evolution_axis(self):
        g = Grid((Axis("t", 8, 0.1, evolution=True), Axis("x", 16, 0.1, periodic=True)))
        assert g.shape == (16,)


class TestField:
    def test_shape_mismatch(self, line_grid):
        with pytest.raises(GridMismatch):
            Field(line_grid, np.zeros(12))

    def test_nonfinite_rejected(self, line_grid):
        vals = np.zeros(64)
        vals[3] = np.nan
        with pytest.raises(NonFinite):
            Field(line_grid, vals)

    def test_values_immutable(self, line_grid):
        f = Field(line_grid, np.zeros(64))
        with pytest.raises(ValueError):
            f.values[0] = 1.0


class TestL2Norm:
    def test_zero_field(self, line_grid):
        assert field_l2_norm(Field(line_grid, np.zeros(64))) == 0.0

    def test_unit_field_unit_volume(self, line_grid):
        assert field_l2_norm(Field(line_grid, np.ones(64))) == pytest.approx(1.0, abs=1e-14)

    def test_sine_norm(self, line_grid):
        # integral of sin^2 over one period is 1/2; midpoint rule is exact
        # for this band-limited integrand
        x = line_grid.coords("x")
        f = Field(line_grid, np.sin(2 * np.pi * x))
        assert field_l2_norm(f) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)

    def test_mask_restricts(self, line_grid):
        f = Field(line_grid, np.ones(64))
        mask = np.zeros(64)
        mask[:32] = 1.0
        assert field_l2_norm(f, Field(line_grid, mask)) == pytest.approx(
            np.sqrt(0.5), abs=1e-14
        )

    def test_mask_grid_mismatch(self, line_grid, plane_grid):
        f = Field(line_grid, np.ones(64))
        with pytest.raises(GridMismatch):
            field_l2_norm(f, Field(plane_grid, np.ones((64, 32))))

    @settings(max_examples=100, deadline=None)
    @given(
        a=st.floats(-1e3, 1e3, allow_nan=False),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_absolute_homogeneity(self, a, seed):
        grid = Grid((Axis("x", 32, 1.0 / 32, periodic=True),))
        rng = np.random.default_rng(seed)
        f = Field(grid, rng.normal(size=32))
        assert field_l2_norm(Field(grid, a * f.values)) == pytest.approx(
            abs(a) * field_l2_norm(f), rel=1e-12, abs=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_triangle_inequality(self, seed):
        grid = Grid((Axis("x", 32, 1.0 / 32, periodic=True),))
        rng = np.random.default_rng(seed)
        f = rng.normal(size=32)
        g = rng.normal(size=32)
        lhs = field_l2_norm(Field(grid, f + g))
        rhs = field_l2_norm(Field(grid, f)) + field_l2_norm(Field(grid, g))
        assert lhs <= rhs + 1e-12


class TestConservedState:
    def test_positive_density_enforced(self, line_grid):
        rho = np.ones(64)
        rho[5] = -0.1
        with pytest.raises(NonPositiveDensity):
            ConservedState(Field(line_grid, rho), (Field(line_grid, np.zeros(64)),))

    def test_shared_grid_enforced(self, line_grid, plane_grid):
        with pytest.raises(GridMismatch):
            ConservedState(
                Field(line_grid, np.ones(64)),
                (Field(plane_grid, np.zeros((64, 32))),),
            )


class TestProfileSolution:
    def test_cubic_interpolation_exact_on_cubics(self, line_grid):
        # values depend cubically on the evolution coordinate, so 4-point
        # Lagrange interpolation must reproduce them exactly
        zs = np.linspace(0.0, 1.0, 9)
        snaps = [
            {"I": Field(line_grid, np.full(64, 1.0 + 2 * z - z**2 + 0.5 * z**3))}
            for z in zs
        ]
        sol = ProfileSolution("z", zs, snaps)
        for z in [0.05, 0.33, 0.5, 0.77, 0.999]:
            expect = 1.0 + 2 * z - z**2 + 0.5 * z**3
            assert sol.field_at("I", z).values[0] == pytest.approx(expect, rel=1e-12)

    def test_out_of_range(self, line_grid):
        zs = np.linspace(0.0, 1.0, 5)
        snaps = [{"I": Field(line_grid, np.zeros(64))} for _ in zs]
        sol = ProfileSolution("z", zs, snaps)
        with pytest.raises(DomainExceeded):
            sol.field_at("I", 1.5)


class TestSnapshotIO:
    def test_roundtrip(self, tmp_path, plane_grid):
        rng = np.random.default_rng(7)
        f = random_bandlimited(plane_grid, rng, zero_mean=False)
        path = tmp_path / "field.ac1"
        snapshot.save_field(path, f)
        g = snapshot.load_field(path)
        assert g.grid.shape == f.grid.shape
        np.testing.assert_array_equal(g.values, f.values)
        for a, b in zip(g.grid.field_axes, f.grid.field_axes):
            assert a.name == b.name and a.n == b.n and a.periodic == b.periodic
            assert a.dx == b.dx

    def test_header_is_single_ascii_line(self, tmp_path, line_grid):
        path = tmp_path / "f.ac1"
        snapshot.save_field(path, Field(line_grid, np.zeros(64)))
        with open(path, "rb") as fh:
            header = fh.readline()
        assert header.startswith(b"AC1 ")
        assert header.decode("ascii")
