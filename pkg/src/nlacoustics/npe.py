"""Time-domain paraxial model: evolution in slow time of q = Psi_z.

The potential profile Psi(tau, z, y) obeys

    Psi_{tau z} - (gamma+1)/4 (Psi_z^2)_z - nu/(2 rho0) Psi_{zzz}
                + (c/2) lap_y Psi = 0,

which closes in q = Psi_z after one z-derivative and one zero-mean
antiderivative:

    q_tau = (gamma+1)/4 (q^2)_z + nu/(2 rho0) q_zz - (c/2) lap_y dz^{-1} q.

Profile grids put transverse axes first and the periodic ``z`` axis last.
The z-mean of q is conserved exactly (mode 0 has no dynamics), matching
the zero-mean class the antiderivative needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, ModelParams, ProfileSolution, validate_params
from .errors import NonFinite, NonzeroMean
from .spectral import (
    MEAN_TOL,
    PeriodicAxisHandle,
    antiderivative_zero_mean_values,
    d_dx_values,
    dealiased_product_nd,
    periodic_axis,
)

__all__ = [
    "NpeProfile",
    "npe_rhs",
    "solve_npe",
    "npe_correctors",
    "kzk_to_npe_coords",
    "npe_to_kzk_coords",
    "suggested_dtau",
]

BLOWUP_FACTOR = 1e3

ZAXIS = "z"


@dataclass(frozen=True)
class NpeProfile:
    """Potential slope q = Psi_z at one slow-time position."""

    q: Field
    tau: float = 0.0

    def __post_init__(self):
        check_zero_mean(self.q)


def z_handle(grid: Grid) -> PeriodicAxisHandle:
    return periodic_axis(grid, ZAXIS)


def transverse_handles(grid: Grid) -> tuple[PeriodicAxisHandle, ...]:
    return tuple(
        periodic_axis(grid, a.name) for a in grid.field_axes if a.name != ZAXIS
    )


def check_zero_mean(f: Field) -> None:
    h = z_handle(f.grid)
    scale = np.max(np.abs(f.values))
    if scale == 0.0:
        return
    mean = np.max(np.abs(np.mean(f.values, axis=h.axis_index)))
    if mean > MEAN_TOL * scale:
        raise NonzeroMean(
            f"z-mean magnitude {mean:.3e} exceeds {MEAN_TOL:.0e} * max|q|"
        )


def npe_rhs(prof: NpeProfile, p: ModelParams, nonlinear: bool = True) -> Field:
    """Slow-time derivative dq/dtau; mode 0 in z of the output is exactly zero."""
    validate_params(p)
    grid = prof.q.grid
    hz = z_handle(grid)
    all_handles = (hz,) + transverse_handles(grid)
    vals = prof.q.values

    out = (p.nu / (2.0 * p.rho0)) * d_dx_values(vals, hz, 2)
    if nonlinear:
        sq = dealiased_product_nd(vals, vals, all_handles)
        out = out + ((p.gamma + 1.0) / 4.0) * d_dx_values(sq, hz, 1)
    for hy in transverse_handles(grid):
        lap_y = d_dx_values(vals, hy, 2)
        out = out - (p.c / 2.0) * antiderivative_zero_mean_values(
            lap_y, hz, check_mean=False
        )
    if not np.all(np.isfinite(out)):
        raise NonFinite("npe rhs produced non-finite values", last_good=prof.tau)
    return Field(grid, out)


def suggested_dtau(grid: Grid, p: ModelParams, amplitude: float = 1.0,
                   safety: float = 0.5) -> float:
    hz = z_handle(grid)
    kz_max = np.pi * hz.n / hz.length
    kz_min = 2.0 * np.pi / hz.length
    rates = []
    if p.nu > 0:
        rates.append((p.nu / (2 * p.rho0)) * kz_max**2 / 2.5)
    for hy in transverse_handles(grid):
        ky_max = np.pi * hy.n / hy.length
        rates.append((p.c / 2.0) * ky_max**2 / kz_min / 2.8)
    rates.append((p.gamma + 1) / 2.0 * kz_max * abs(amplitude) / 1.7)
    return safety / max(rates)


def solve_npe(
    q0: Field,
    p: ModelParams,
    tau_end: float,
    dtau: float,
    cadence: int = 1,
    nonlinear: bool = True,
    tau0: float = 0.0,
) -> ProfileSolution:
    """RK4 march of q over [tau0, tau0 + tau_end]."""
    validate_params(p)
    check_zero_mean(q0)
    if dtau <= 0 or tau_end <= 0:
        raise ValueError("dtau and tau_end must be positive")
    n_steps = int(round(tau_end / dtau))
    if abs(n_steps * dtau - tau_end) > 1e-9 * max(tau_end, dtau):
        n_steps = int(np.ceil(tau_end / dtau - 1e-12))
        dtau = tau_end / n_steps

    grid = q0.grid
    vals = q0.values.copy()
    scale0 = max(np.max(np.abs(vals)), 1e-300)
    tau = tau0

    def rhs(v, at):
        return npe_rhs(NpeProfile(Field(grid, v), at), p, nonlinear=nonlinear).values

    coords = [tau]
    snaps = [{"q": Field(grid, vals.copy())}]
    for step in range(n_steps):
        try:
            k1 = rhs(vals, tau)
            k2 = rhs(vals + 0.5 * dtau * k1, tau + 0.5 * dtau)
            k3 = rhs(vals + 0.5 * dtau * k2, tau + 0.5 * dtau)
            k4 = rhs(vals + dtau * k3, tau + dtau)
        except (NonFinite, NonzeroMean) as exc:
            raise NonFinite(f"blow-up during step {step + 1}", last_good=tau) from exc
        vals = vals + (dtau / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau = tau0 + (step + 1) * dtau
        if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > BLOWUP_FACTOR * scale0:
            raise NonFinite(
                f"blow-up after step {step + 1} (pre-shock abort)",
                last_good=tau - dtau,
            )
        if (step + 1) % cadence == 0 or step == n_steps - 1:
            coords.append(tau)
            snaps.append({"q": Field(grid, vals.copy())})
    return ProfileSolution("tau", np.array(coords), snaps, params=p,
                           meta={"nonlinear": nonlinear})


def npe_correctors(
    prof: NpeProfile, p: ModelParams, nonlinear: bool = True
) -> tuple[Field, Field]:
    """Density correctors of the slow-time expansion.

    P1 = (rho0/c) q
    P2 = (rho0/c^4) Psi_tau - (rho0 (gamma+3) / 2 c^2) q^2 - (nu/c^2) q_z

    Psi_tau is evaluated as dz^{-1} applied to the evolution law, which
    avoids storing a time history of Psi.
    """
    validate_params(p)
    grid = prof.q.grid
    hz = z_handle(grid)
    all_handles = (hz,) + transverse_handles(grid)

    P1 = Field(grid, (p.rho0 / p.c) * prof.q.values)
    dq_dtau = npe_rhs(prof, p, nonlinear=nonlinear).values
    psi_tau = antiderivative_zero_mean_values(dq_dtau, hz, check_mean=False)
    q_sq = dealiased_product_nd(prof.q.values, prof.q.values, all_handles)
    P2 = Field(
        grid,
        (p.rho0 / p.c**4) * psi_tau
        - (p.rho0 * (p.gamma + 3.0) / (2.0 * p.c**2)) * q_sq
        - (p.nu / p.c**2) * d_dx_values(prof.q.values, hz, 1),
    )
    return P1, P2


def kzk_to_npe_coords(tau_k, z_k, p: ModelParams):
    """Affine map between the two paraxial frames (range and time swap roles)."""
    tau_n = p.eps * np.asarray(tau_k) + np.asarray(z_k) / p.c
    z_n = -p.c * np.asarray(tau_k)
    return tau_n, z_n


def npe_to_kzk_coords(tau_n, z_n, p: ModelParams):
    tau_k = -np.asarray(z_n) / p.c
    z_k = p.c * np.asarray(tau_n) + p.eps * np.asarray(z_n)
    return tau_k, z_k
