"""Damped nonlinear wave equation for the velocity potential.

    phi_tt - c^2 lap(phi) = eps * d/dt( |grad phi|^2
                                        + (gamma-1)/(2 c^2) (phi_t)^2
                                        + (nu/rho0) lap(phi) )

solved on a fully periodic box.  The time derivative of the nonlinear
terms is expanded by the chain rule; the phi_tt occurrences move to the
left side and the pointwise-linear system for the acceleration is solved
directly (coefficient 1 - eps (gamma-1)/c^2 phi_t, guarded away from 0).

The module also provides the first and second density correctors of the
perturbation expansion rho = rho0 + eps rho1 + eps^2 rho2, u = -eps grad
phi, and the mass/momentum residual fields that measure how well a state
realizes that expansion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Field, Grid, ModelParams, ProfileSolution, field_l2_norm, validate_params
from .errors import CFLViolation, GridMismatch, NonFinite
from .spectral import (
    PeriodicAxisHandle,
    d_dx_values,
    dealiased_product_nd,
    periodic_axis,
)

__all__ = [
    "PotentialState",
    "kuznetsov_rhs",
    "solve_kuznetsov",
    "density_correctors",
    "kuznetsov_residuals",
    "wave_energy",
]

DENOMINATOR_FLOOR = 0.1

SourceFn = Callable[[float, Grid], np.ndarray]


@dataclass(frozen=True)
class PotentialState:
    """Velocity potential, its time derivative, and the current time."""

    phi: Field
    phi_t: Field
    t: float = 0.0

    def __post_init__(self):
        if self.phi.grid != self.phi_t.grid:
            raise GridMismatch("phi and phi_t must share a grid")
        for a in self.phi.grid.field_axes:
            if not a.periodic:
                raise GridMismatch(f"axis {a.name!r} must be periodic")


def _handles(grid: Grid) -> tuple[PeriodicAxisHandle, ...]:
    return tuple(periodic_axis(grid, a.name) for a in grid.field_axes)


def _laplacian(values: np.ndarray, handles) -> np.ndarray:
    out = np.zeros_like(values)
    for h in handles:
        out += d_dx_values(values, h, 2)
    return out


def _gradient(values: np.ndarray, handles) -> list[np.ndarray]:
    return [d_dx_values(values, h, 1) for h in handles]


def kuznetsov_rhs(
    s: PotentialState,
    p: ModelParams,
    nonlinear: bool = True,
    source: SourceFn | None = None,
) -> Field:
    """Acceleration phi_tt for the current state."""
    validate_params(p)
    grid = s.phi.grid
    handles = _handles(grid)
    phi, phi_t = s.phi.values, s.phi_t.values

    rhs = p.c**2 * _laplacian(phi, handles)
    if p.nu > 0:
        rhs = rhs + p.eps * (p.nu / p.rho0) * _laplacian(phi_t, handles)
    if source is not None:
        rhs = rhs + source(s.t, grid)

    if nonlinear:
        grad_phi = _gradient(phi, handles)
        grad_phi_t = _gradient(phi_t, handles)
        cross = np.zeros_like(phi)
        for ga, gb in zip(grad_phi, grad_phi_t):
            cross += dealiased_product_nd(ga, gb, handles)
        rhs = rhs + 2.0 * p.eps * cross
        denom = 1.0 - p.eps * (p.gamma - 1.0) / p.c**2 * phi_t
        denom = np.where(
            np.abs(denom) < DENOMINATOR_FLOOR,
            np.where(denom < 0, -DENOMINATOR_FLOOR, DENOMINATOR_FLOOR),
            denom,
        )
        rhs = rhs / denom

    if not np.all(np.isfinite(rhs)):
        raise NonFinite("kuznetsov rhs produced non-finite values", last_good=s.t)
    return Field(grid, rhs)


RK4_REAL_AXIS = 2.5  # conservative real-axis stability radius for RK4


def cfl_limit(grid: Grid, p: ModelParams, cfl: float = 0.5) -> float:
    """Step bound: wave CFL plus, for nu > 0, the explicit-diffusion limit."""
    bound = cfl * min(a.dx for a in grid.field_axes) / p.c
    if p.nu > 0 and p.eps > 0:
        k2_max = sum((np.pi / a.dx) ** 2 for a in grid.field_axes)
        bound = min(bound, RK4_REAL_AXIS * p.rho0 / (p.eps * p.nu * k2_max))
    return bound


def solve_kuznetsov(
    s0: PotentialState,
    p: ModelParams,
    t_end: float,
    dt: float,
    cadence: int = 1,
    nonlinear: bool = True,
    source: SourceFn | None = None,
) -> ProfileSolution:
    """March (phi, phi_t) with classical RK4; snapshots every ``cadence`` steps."""
    validate_params(p)
    if dt <= 0:
        raise CFLViolation(f"dt must be positive, got {dt}")
    bound = cfl_limit(s0.phi.grid, p)
    if dt > bound * (1 + 1e-12):
        raise CFLViolation(f"dt={dt} exceeds CFL bound {bound}")

    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(t_end, dt):
        n_steps = int(np.ceil(t_end / dt - 1e-12))
        dt = t_end / n_steps

    grid = s0.phi.grid
    phi = s0.phi.values.copy()
    phi_t = s0.phi_t.values.copy()
    t = s0.t

    def accel(a_phi, a_phi_t, a_t):
        state = PotentialState(Field(grid, a_phi), Field(grid, a_phi_t), a_t)
        return kuznetsov_rhs(state, p, nonlinear=nonlinear, source=source).values

    coords = [t]
    snaps = [{"phi": Field(grid, phi.copy()), "phi_t": Field(grid, phi_t.copy())}]
    for step in range(n_steps):
        try:
            k1p, k1v = phi_t, accel(phi, phi_t, t)
            k2p = phi_t + 0.5 * dt * k1v
            k2v = accel(phi + 0.5 * dt * k1p, k2p, t + 0.5 * dt)
            k3p = phi_t + 0.5 * dt * k2v
            k3v = accel(phi + 0.5 * dt * k2p, k3p, t + 0.5 * dt)
            k4p = phi_t + dt * k3v
            k4v = accel(phi + dt * k3p, k4p, t + dt)
        except NonFinite as exc:
            raise NonFinite(
                f"blow-up during step {step + 1}", last_good=t
            ) from exc
        phi = phi + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        phi_t = phi_t + (dt / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = s0.t + (step + 1) * dt
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(phi_t))):
            raise NonFinite(f"blow-up after step {step + 1}", last_good=t - dt)
        if (step + 1) % cadence == 0 or step == n_steps - 1:
            coords.append(t)
            snaps.append(
                {"phi": Field(grid, phi.copy()), "phi_t": Field(grid, phi_t.copy())}
            )
    return ProfileSolution("t", np.array(coords), snaps, params=p)


def _quadratic_pieces(s: PotentialState, p: ModelParams):
    """Shared discrete products: (phi_t^2, |grad phi|^2, lap phi), dealiased."""
    grid = s.phi.grid
    handles = _handles(grid)
    phi_t2 = dealiased_product_nd(s.phi_t.values, s.phi_t.values, handles)
    grad = _gradient(s.phi.values, handles)
    grad2 = np.zeros_like(s.phi.values)
    for g in grad:
        grad2 += dealiased_product_nd(g, g, handles)
    lap = _laplacian(s.phi.values, handles)
    return phi_t2, grad2, lap


def density_correctors(s: PotentialState, p: ModelParams) -> tuple[Field, Field]:
    """First and second density correctors of the expansion.

    rho1 = (rho0/c^2) phi_t
    rho2 = -(rho0 (gamma-2) / 2 c^4) phi_t^2 - (rho0 / 2 c^2) |grad phi|^2
           - (nu / c^2) lap phi

    The phi_t^2 coefficient is the one that cancels the second-order
    momentum bracket exactly (and reduces to the paraxial second
    corrector); see kuznetsov_residuals.
    """
    validate_params(p)
    grid = s.phi.grid
    phi_t2, grad2, lap = _quadratic_pieces(s, p)
    rho1 = (p.rho0 / p.c**2) * s.phi_t.values
    rho2 = (
        -(p.rho0 * (p.gamma - 2.0) / (2.0 * p.c**4)) * phi_t2
        - (p.rho0 / (2.0 * p.c**2)) * grad2
        - (p.nu / p.c**2) * lap
    )
    return Field(grid, rho1), Field(grid, rho2)


def kuznetsov_residuals(
    s: PotentialState,
    rho1: Field,
    rho2: Field,
    p: ModelParams,
    phi_tt: Field | None = None,
) -> tuple[Field, list[Field]]:
    """Mass and momentum residuals of the expansion around a state.

    The mass residual is (eps rho0/c^2) times the equation defect; the
    momentum residual is the gradient of the first- and second-order
    brackets, which vanish identically when the correctors come from
    density_correctors.  ``phi_tt`` defaults to the self-consistent
    acceleration; pass a time-differenced field to measure a trajectory.
    """
    validate_params(p)
    grid = s.phi.grid
    if rho1.grid != grid or rho2.grid != grid:
        raise GridMismatch("correctors must live on the state grid")
    handles = _handles(grid)
    if phi_tt is None:
        phi_tt = kuznetsov_rhs(s, p)
    phi, phi_t, acc = s.phi.values, s.phi_t.values, phi_tt.values

    grad_phi = _gradient(phi, handles)
    grad_phi_t = _gradient(phi_t, handles)
    cross = np.zeros_like(phi)
    for ga, gb in zip(grad_phi, grad_phi_t):
        cross += dealiased_product_nd(ga, gb, handles)
    lap_phi_t = _laplacian(phi_t, handles)
    # the phi_t * phi_tt product stays pointwise, matching the pointwise
    # linear solve for the acceleration in kuznetsov_rhs
    dt_bracket = (
        2.0 * cross
        + (p.gamma - 1.0) / p.c**2 * (phi_t * acc)
        + (p.nu / p.rho0) * lap_phi_t
    )
    lap_phi = _laplacian(phi, handles)
    mass = (p.eps * p.rho0 / p.c**2) * (
        acc - p.c**2 * lap_phi - p.eps * dt_bracket
    )

    phi_t2, grad2, lap = _quadratic_pieces(s, p)
    bracket1 = rho1.values - (p.rho0 / p.c**2) * phi_t
    bracket2 = (
        p.c**2 * rho2.values
        + (p.rho0 * (p.gamma - 2.0) / (2.0 * p.c**2)) * phi_t2
        + (p.rho0 / 2.0) * grad2
        + p.nu * lap
    )
    momentum = [
        Field(
            grid,
            p.eps * d_dx_values(bracket1, h, 1)
            + p.eps**2 * d_dx_values(bracket2, h, 1),
        )
        for h in handles
    ]
    return Field(grid, mass), momentum


def wave_energy(s: PotentialState, p: ModelParams) -> float:
    """Discrete wave energy ||phi_t||^2 + c^2 ||grad phi||^2."""
    grid = s.phi.grid
    handles = _handles(grid)
    e = field_l2_norm(s.phi_t) ** 2
    for g in _gradient(s.phi.values, handles):
        e += p.c**2 * field_l2_norm(Field(grid, g)) ** 2
    return float(e)
