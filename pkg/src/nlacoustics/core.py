"""Shared parameter, grid and field types.

Everything downstream (spectral calculus, the model solvers, the
validation harness) speaks in terms of these types.  They are immutable
after construction and safe to share between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import numpy as np

from .errors import (
    DomainExceeded,
    GridMismatch,
    NonFinite,
    NonPositiveDensity,
    ParamError,
)

__all__ = [
    "ModelParams",
    "Axis",
    "Grid",
    "Field",
    "ConservedState",
    "ProfileSolution",
    "validate_params",
    "field_l2_norm",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants shared by every model.

    rho0      ambient density [kg/m^3]
    c         sound speed [m/s]
    gamma     heat-capacity ratio
    nu        reduced viscosity [kg/(m s)]
    eps       perturbation scale (dimensionless, 0 < eps < 1)
    period_L  period of the retarded-time / propagation periodic variable
    """

    rho0: float = 1.0
    c: float = 1.0
    gamma: float = 1.4
    nu: float = 0.0
    eps: float = 0.1
    period_L: float = 1.0


def validate_params(p: ModelParams) -> ModelParams:
    """Return ``p`` unchanged iff every parameter bound holds."""
    if not (p.rho0 > 0 and np.isfinite(p.rho0)):
        raise ParamError("rho0", f"rho0 must be positive, got {p.rho0}")
    if not (p.c > 0 and np.isfinite(p.c)):
        raise ParamError("c", f"c must be positive, got {p.c}")
    if not (p.gamma > 1 and np.isfinite(p.gamma)):
        raise ParamError("gamma", f"gamma must exceed 1, got {p.gamma}")
    if not (p.nu >= 0 and np.isfinite(p.nu)):
        raise ParamError("nu", f"nu must be nonnegative, got {p.nu}")
    if not (0 < p.eps < 1):
        raise ParamError("eps", f"eps must lie in (0, 1), got {p.eps}")
    if not (p.period_L > 0 and np.isfinite(p.period_L)):
        raise ParamError("period_L", f"period_L must be positive, got {p.period_L}")
    return p


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Axis:
    """One grid direction: ``n`` points spaced ``dx`` starting at ``origin``."""

    name: str
    n: int
    dx: float
    periodic: bool = False
    evolution: bool = False
    origin: float = 0.0

    def __post_init__(self):
        if self.n < 4:
            raise ParamError("n", f"axis {self.name!r}: need n >= 4, got {self.n}")
        if self.dx <= 0 or not np.isfinite(self.dx):
            raise ParamError("dx", f"axis {self.name!r}: dx must be positive")
        if self.periodic and not _is_power_of_two(self.n):
            raise ParamError(
                "n", f"axis {self.name!r}: periodic axes need a power-of-two n, got {self.n}"
            )

    @property
    def length(self) -> float:
        return self.n * self.dx

    def coords(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.n)


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid; at most one axis may be flagged as evolution."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if isinstance(self.axes, list):
            object.__setattr__(self, "axes", tuple(self.axes))
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ParamError("axes", f"duplicate axis names: {names}")
        n_evo = sum(a.evolution for a in self.axes)
        if n_evo > 1:
            raise ParamError("axes", f"at most one evolution axis allowed, got {n_evo}")

    @property
    def field_axes(self) -> tuple[Axis, ...]:
        return tuple(a for a in self.axes if not a.evolution)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.field_axes)

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for a in self.field_axes:
            vol *= a.dx
        return vol

    def axis(self, name: str) -> Axis:
        for a in self.axes:
            if a.name == name:
                return a
        raise KeyError(f"no axis named {name!r}")

    def axis_index(self, name: str) -> int:
        for i, a in enumerate(self.field_axes):
            if a.name == name:
                return i
        raise KeyError(f"no field axis named {name!r}")

    def coords(self, name: str) -> np.ndarray:
        return self.axis(name).coords()


@dataclass(frozen=True)
class Field:
    """Real values sampled on a grid, row-major in field-axis order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.shape != self.grid.shape:
            raise GridMismatch(
                f"values shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFinite("field contains non-finite values")
        arr = arr.copy() if arr.flags.writeable else arr
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def same_grid(self, other: "Field") -> bool:
        return self.grid == other.grid


def zeros_like(f: Field) -> Field:
    return Field(f.grid, np.zeros(f.grid.shape))


def field_l2_norm(f: Field, mask: Field | None = None) -> float:
    """Cell-volume-weighted discrete L2 norm, optionally over an indicator mask."""
    if mask is not None:
        if mask.grid != f.grid:
            raise GridMismatch("mask grid differs from field grid")
        w = mask.values
        if not np.all((w == 0.0) | (w == 1.0)):
            raise GridMismatch("mask values must be 0 or 1")
        total = np.sum(w * f.values * f.values)
    else:
        total = np.sum(f.values * f.values)
    return float(np.sqrt(total * f.grid.cell_volume))


@dataclass(frozen=True)
class ConservedState:
    """Density and momentum fields on one shared grid; the flow-solver unknown."""

    rho: Field
    momentum: tuple[Field, ...]

    def __post_init__(self):
        if isinstance(self.momentum, list):
            object.__setattr__(self, "momentum", tuple(self.momentum))
        if np.any(self.rho.values <= 0):
            raise NonPositiveDensity("rho must be positive pointwise")
        for m in self.momentum:
            if m.grid != self.rho.grid:
                raise GridMismatch("momentum component grid differs from rho grid")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def velocity(self) -> tuple[np.ndarray, ...]:
        return tuple(m.values / self.rho.values for m in self.momentum)


def _lagrange4_weights(s: float) -> np.ndarray:
    # cubic Lagrange weights on nodes {-1, 0, 1, 2} evaluated at offset s in [0, 1]
    return np.array(
        [
            -s * (s - 1) * (s - 2) / 6.0,
            (s + 1) * (s - 1) * (s - 2) / 2.0,
            -(s + 1) * s * (s - 2) / 2.0,
            (s + 1) * s * (s - 1) / 6.0,
        ]
    )


@dataclass
class ProfileSolution:
    """A solved profile stored along its evolution variable.

    ``snapshots[i]`` maps component names (e.g. ``"I"`` or ``"phi"``) to
    Fields recorded at ``coords[i]``.  Interpolation between stored
    slices is cubic (four-point Lagrange) on the uniform cadence.
    """

    var: str
    coords: np.ndarray
    snapshots: list[dict[str, Field]]
    params: ModelParams | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if len(self.coords) != len(self.snapshots):
            raise GridMismatch("coords and snapshots lengths differ")

    @property
    def grid(self) -> Grid:
        return next(iter(self.snapshots[0].values())).grid

    def component(self, name: str) -> list[Field]:
        return [snap[name] for snap in self.snapshots]

    def interp_stencil(self, coord: float) -> tuple[int, np.ndarray]:
        """Base index and 4 Lagrange weights for cubic interpolation at ``coord``."""
        z = self.coords
        if len(z) < 4:
            raise DomainExceeded("need at least 4 stored slices for interpolation")
        dz = z[1] - z[0]
        tol = 1e-9 * max(abs(z[-1] - z[0]), dz)
        if coord < z[0] - tol or coord > z[-1] + tol:
            raise DomainExceeded(
                f"{self.var}={coord} outside stored range [{z[0]}, {z[-1]}]"
            )
        pos = (coord - z[0]) / dz
        i = int(np.floor(pos))
        i = min(max(i, 1), len(z) - 3)  # clamp so the 4-point stencil stays in range
        s = pos - i
        return i - 1, _lagrange4_weights(s)

    def field_at(self, name: str, coord: float) -> Field:
        i0, w = self.interp_stencil(coord)
        vals = sum(
            w[j] * self.snapshots[i0 + j][name].values for j in range(4)
        )
        return Field(self.grid, vals)
