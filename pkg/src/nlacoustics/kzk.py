"""Paraxial beam model in retarded time, marched along the range variable.

The density-perturbation profile I(tau, z, y) obeys

    c I_{tau z} - (gamma+1)/(4 rho0) (I^2)_{tau tau}
                - nu/(2 c^2 rho0) I_{tau tau tau} - (c^2/2) lap_y I = 0,

rearranged after one retarded-time antiderivative into an evolution law

    I_z = (gamma+1)/(4 rho0 c) (I^2)_tau + nu/(2 c^3 rho0) I_{tau tau}
          + (c/2) dtau^{-1} lap_y I

on the L-periodic zero-mean class in tau, where the antiderivative is
well defined.  Mode 0 in tau has no dynamics, so the zero mean is
preserved exactly along the march.

Profile grids put the transverse axes first and the periodic ``tau``
axis last (innermost).  The physical reconstruction samples the profile
at (t - x1/c, eps*x1, sqrt(eps)*x'), trigonometric-exact in tau and
cubic between stored range slices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .core import Field, Grid, ModelParams, ProfileSolution, validate_params
from .errors import (
    DomainExceeded,
    GridMismatch,
    NonFinite,
    NonPositiveDensity,
    NonzeroMean,
)
from .spectral import (
    MEAN_TOL,
    PeriodicAxisHandle,
    antiderivative_zero_mean_values,
    d_dx_values,
    dealiased_product_nd,
    periodic_axis,
)

__all__ = [
    "KzkProfile",
    "ReconstructedState",
    "kzk_rhs",
    "solve_kzk",
    "potential_from_density",
    "kzk_correctors",
    "reconstruct_physical",
    "paraxial_operator_identity_check",
    "suggested_dz",
]

BLOWUP_FACTOR = 1e3

TAU = "tau"


@dataclass(frozen=True)
class KzkProfile:
    """Density-perturbation profile at one range position."""

    I: Field
    z: float = 0.0

    def __post_init__(self):
        check_zero_mean(self.I)


def tau_handle(grid: Grid) -> PeriodicAxisHandle:
    return periodic_axis(grid, TAU)


def transverse_handles(grid: Grid) -> tuple[PeriodicAxisHandle, ...]:
    return tuple(
        periodic_axis(grid, a.name) for a in grid.field_axes if a.name != TAU
    )


def check_zero_mean(f: Field) -> None:
    h = tau_handle(f.grid)
    scale = np.max(np.abs(f.values))
    if scale == 0.0:
        return
    mean = np.max(np.abs(np.mean(f.values, axis=h.axis_index)))
    if mean > MEAN_TOL * scale:
        raise NonzeroMean(
            f"tau-mean magnitude {mean:.3e} exceeds {MEAN_TOL:.0e} * max|I|"
        )


def kzk_rhs(prof: KzkProfile, p: ModelParams, nonlinear: bool = True) -> Field:
    """Range derivative dI/dz; mode 0 in tau of the output is exactly zero."""
    validate_params(p)
    grid = prof.I.grid
    ht = tau_handle(grid)
    all_handles = (ht,) + transverse_handles(grid)
    vals = prof.I.values

    out = (p.nu / (2.0 * p.c**3 * p.rho0)) * d_dx_values(vals, ht, 2)
    if nonlinear:
        sq = dealiased_product_nd(vals, vals, all_handles)
        out = out + ((p.gamma + 1.0) / (4.0 * p.rho0 * p.c)) * d_dx_values(sq, ht, 1)
    for hy in transverse_handles(grid):
        lap_y = d_dx_values(vals, hy, 2)
        out = out + (p.c / 2.0) * antiderivative_zero_mean_values(
            lap_y, ht, check_mean=False
        )
    if not np.all(np.isfinite(out)):
        raise NonFinite("kzk rhs produced non-finite values", last_good=prof.z)
    return Field(grid, out)


def suggested_dz(grid: Grid, p: ModelParams, amplitude: float = 1.0,
                 safety: float = 0.5) -> float:
    """Explicit RK4 step estimate covering damping, diffraction and advection."""
    ht = tau_handle(grid)
    w_max = np.pi * ht.n / ht.length
    w_min = 2.0 * np.pi / ht.length
    rates = []
    if p.nu > 0:
        rates.append((p.nu / (2 * p.c**3 * p.rho0)) * w_max**2 / 2.5)
    for hy in transverse_handles(grid):
        ky_max = np.pi * hy.n / hy.length
        rates.append((p.c / 2.0) * ky_max**2 / w_min / 2.8)
    rates.append((p.gamma + 1) / (2 * p.rho0 * p.c) * w_max * abs(amplitude) / 1.7)
    return safety / max(rates)


def solve_kzk(
    I0: Field,
    p: ModelParams,
    z_end: float,
    dz: float,
    cadence: int = 1,
    nonlinear: bool = True,
    z0: float = 0.0,
) -> ProfileSolution:
    """RK4 march of the profile over [z0, z0 + z_end]."""
    validate_params(p)
    check_zero_mean(I0)
    if dz <= 0 or z_end <= 0:
        raise ValueError("dz and z_end must be positive")
    n_steps = int(round(z_end / dz))
    if abs(n_steps * dz - z_end) > 1e-9 * max(z_end, dz):
        n_steps = int(np.ceil(z_end / dz - 1e-12))
        dz = z_end / n_steps

    grid = I0.grid
    vals = I0.values.copy()
    scale0 = max(np.max(np.abs(vals)), 1e-300)
    z = z0

    def rhs(v, at_z):
        return kzk_rhs(KzkProfile(Field(grid, v), at_z), p, nonlinear=nonlinear).values

    coords = [z]
    snaps = [{"I": Field(grid, vals.copy())}]
    for step in range(n_steps):
        try:
            k1 = rhs(vals, z)
            k2 = rhs(vals + 0.5 * dz * k1, z + 0.5 * dz)
            k3 = rhs(vals + 0.5 * dz * k2, z + 0.5 * dz)
            k4 = rhs(vals + dz * k3, z + dz)
        except (NonFinite, NonzeroMean) as exc:
            raise NonFinite(f"blow-up during step {step + 1}", last_good=z) from exc
        vals = vals + (dz / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        z = z0 + (step + 1) * dz
        if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > BLOWUP_FACTOR * scale0:
            raise NonFinite(
                f"blow-up after step {step + 1} (|I| grew past "
                f"{BLOWUP_FACTOR:g} x initial)",
                last_good=z - dz,
            )
        if (step + 1) % cadence == 0 or step == n_steps - 1:
            coords.append(z)
            snaps.append({"I": Field(grid, vals.copy())})
    return ProfileSolution("z", np.array(coords), snaps, params=p,
                           meta={"nonlinear": nonlinear})


def potential_from_density(prof: KzkProfile, p: ModelParams) -> Field:
    """Velocity-potential profile: Phi = (c^2/rho0) * dtau^{-1} I, zero tau-mean."""
    validate_params(p)
    ht = tau_handle(prof.I.grid)
    check_zero_mean(prof.I)
    vals = (p.c**2 / p.rho0) * antiderivative_zero_mean_values(
        prof.I.values, ht, check_mean=False
    )
    return Field(prof.I.grid, vals)


def kzk_correctors(
    prof: KzkProfile, Phi: Field, p: ModelParams, nonlinear: bool = True
) -> tuple[Field, Field, list[Field], Field]:
    """Velocity and density correctors (v, v1, w, J) from the potential.

    v  = (1/c) Phi_tau              axial velocity profile, = (c/rho0) I
    v1 = -Phi_z                     axial range corrector
    w  = -grad_y Phi                transverse velocity profile
    J  = -(gamma-1) rho0/(2 c^4) (Phi_tau)^2 - nu/c^4 Phi_{tau tau}
    """
    validate_params(p)
    grid = prof.I.grid
    if Phi.grid != grid:
        raise GridMismatch("Phi must live on the profile grid")
    ht = tau_handle(grid)
    all_handles = (ht,) + transverse_handles(grid)

    phi_tau = d_dx_values(Phi.values, ht, 1)
    v = Field(grid, phi_tau / p.c)
    dI_dz = kzk_rhs(prof, p, nonlinear=nonlinear).values
    v1_vals = -(p.c**2 / p.rho0) * antiderivative_zero_mean_values(
        dI_dz, ht, check_mean=False
    )
    if nonlinear:
        # retarded-time mean of the range corrector: the zero-mean
        # antiderivative convention leaves it free, and matching the exact
        # one-way Riemann-invariant relation u(rho) through second order
        # requires exactly the mean of the quadratic term
        mean_sq = np.mean(
            dealiased_product_nd(prof.I.values, prof.I.values, all_handles),
            axis=ht.axis_index,
            keepdims=True,
        )
        v1_vals = v1_vals - (p.c * (p.gamma + 1.0) / (4.0 * p.rho0**2)) * mean_sq
    v1 = Field(grid, np.broadcast_to(v1_vals, grid.shape).copy()
               if v1_vals.shape != grid.shape else v1_vals)
    w = [
        Field(grid, -d_dx_values(Phi.values, hy, 1))
        for hy in transverse_handles(grid)
    ]
    phi_tau_sq = dealiased_product_nd(phi_tau, phi_tau, all_handles)
    J = Field(
        grid,
        -((p.gamma - 1.0) * p.rho0 / (2.0 * p.c**4)) * phi_tau_sq
        - (p.nu / p.c**4) * d_dx_values(Phi.values, ht, 2),
    )
    return v, v1, w, J


@dataclass(frozen=True)
class ReconstructedState:
    """Approximate physical state (density and velocity) at a fixed time."""

    rho_bar: Field
    u_bar: tuple[Field, ...]
    t: float = 0.0

    def __post_init__(self):
        if isinstance(self.u_bar, list):
            object.__setattr__(self, "u_bar", tuple(self.u_bar))
        if np.any(self.rho_bar.values <= 0.0):
            raise NonPositiveDensity("reconstructed density must stay positive")
        for u in self.u_bar:
            if u.grid != self.rho_bar.grid:
                raise GridMismatch("velocity component grid differs from rho grid")

    @property
    def grid(self) -> Grid:
        return self.rho_bar.grid


def _tau_spectral_table(values: np.ndarray) -> np.ndarray:
    # half-complex coefficients along the innermost tau axis
    return np.fft.rfft(values, axis=-1)


def _recon_tables(sol: ProfileSolution, p: ModelParams, nonlinear: bool) -> dict:
    key = ("recon", p, nonlinear)
    cache = sol.meta.setdefault("_cache", {})
    if key in cache:
        return cache[key]
    tables = {"I": [], "v1": [], "J": [], "w": None}
    n_w = None
    for snap, z in zip(sol.snapshots, sol.coords):
        prof = KzkProfile(snap["I"], z)
        Phi = potential_from_density(prof, p)
        _, v1, w, J = kzk_correctors(prof, Phi, p, nonlinear=nonlinear)
        if n_w is None:
            n_w = len(w)
            tables["w"] = [[] for _ in range(n_w)]
        tables["I"].append(_tau_spectral_table(snap["I"].values))
        tables["v1"].append(_tau_spectral_table(v1.values))
        tables["J"].append(_tau_spectral_table(J.values))
        for i, wi in enumerate(w):
            tables["w"][i].append(_tau_spectral_table(wi.values))
    out = {
        "I": np.stack(tables["I"]),
        "v1": np.stack(tables["v1"]),
        "J": np.stack(tables["J"]),
        "w": [np.stack(t) for t in tables["w"]],
    }
    cache[key] = out
    return out


def _interp_weights(sol: ProfileSolution, zq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = sol.coords
    if len(z) < 4:
        raise DomainExceeded("need at least 4 stored slices for reconstruction")
    dz = z[1] - z[0]
    tol = 1e-9 * max(abs(z[-1] - z[0]), dz)
    if np.min(zq) < z[0] - tol or np.max(zq) > z[-1] + tol:
        raise DomainExceeded(
            f"requested z range [{np.min(zq)}, {np.max(zq)}] outside stored "
            f"[{z[0]}, {z[-1]}]"
        )
    pos = (zq - z[0]) / dz
    idx = np.clip(np.floor(pos).astype(int), 1, len(z) - 3)
    s = pos - idx
    w = np.stack(
        [
            -s * (s - 1) * (s - 2) / 6.0,
            (s + 1) * (s - 1) * (s - 2) / 2.0,
            -(s + 1) * s * (s - 2) / 2.0,
            (s + 1) * s * (s - 1) / 6.0,
        ],
        axis=1,
    )
    base = idx - 1
    return base, w


def _sample(table: np.ndarray, base: np.ndarray, w4: np.ndarray,
            phases: np.ndarray) -> np.ndarray:
    # table: (n_slices, *trans, k); base/w4: (n_x1,), (n_x1, 4);
    # phases: (n_x1, k) -> samples (n_x1, *trans)
    stencil = table[base[:, None] + np.arange(4)[None, :]]
    slices = np.einsum("xj,xj...->x...", w4, stencil)
    return np.einsum("x...k,xk->x...", slices, phases).real


def reconstruct_physical(
    sol: ProfileSolution,
    p: ModelParams,
    t: float,
    phys_grid: Grid,
    second_order: bool = True,
    nonlinear: bool | None = None,
) -> ReconstructedState:
    """Sample the solved profile into the physical approximate state.

    rho_bar = rho0 + eps I + eps^2 J   (J optional via ``second_order``)
    u_bar   = (eps (v + eps v1), eps^{3/2} w)

    all evaluated at (t - x1/c, eps*x1, sqrt(eps)*x').  The first
    physical axis is the propagation axis; the remaining axes must be
    node-aligned with the profile's transverse axes under y = sqrt(eps) x'.
    """
    validate_params(p)
    if nonlinear is None:
        nonlinear = bool(sol.meta.get("nonlinear", True))
    prof_grid = sol.grid
    prof_axes = prof_grid.field_axes
    if prof_axes[-1].name != TAU:
        raise GridMismatch("profile grid must have the tau axis innermost")
    trans_axes = prof_axes[:-1]
    phys_axes = phys_grid.field_axes
    if len(phys_axes) != 1 + len(trans_axes):
        raise GridMismatch(
            f"physical grid needs {1 + len(trans_axes)} axes, got {len(phys_axes)}"
        )
    root = np.sqrt(p.eps)
    for pa, ya in zip(phys_axes[1:], trans_axes):
        if pa.n != ya.n:
            raise GridMismatch(f"axis {pa.name!r}: {pa.n} points vs profile {ya.n}")
        if not np.isclose(pa.dx * root, ya.dx, rtol=1e-9):
            raise GridMismatch(
                f"axis {pa.name!r} spacing {pa.dx} is not profile spacing / sqrt(eps)"
            )
        if not np.isclose(pa.origin * root, ya.origin, rtol=1e-9, atol=1e-12):
            raise GridMismatch(f"axis {pa.name!r} origin mismatch")

    x1 = phys_axes[0].coords()
    base, w4 = _interp_weights(sol, p.eps * x1)
    tables = _recon_tables(sol, p, nonlinear)

    ht = tau_handle(prof_grid)
    omega = 2.0 * np.pi * np.arange(ht.n // 2 + 1) / ht.length
    fac = np.full(ht.n // 2 + 1, 2.0 / ht.n)
    fac[0] = 1.0 / ht.n
    if ht.n % 2 == 0:
        fac[-1] = 1.0 / ht.n
    tau_star = t - x1 / p.c
    phases = fac[None, :] * np.exp(1j * np.outer(tau_star, omega))

    I_s = _sample(tables["I"], base, w4, phases)
    rho = p.rho0 + p.eps * I_s
    if second_order:
        rho = rho + p.eps**2 * _sample(tables["J"], base, w4, phases)
    if np.any(rho <= 0.0):
        raise NonPositiveDensity(
            "reconstructed density not positive; eps too large for this profile"
        )
    v1_s = _sample(tables["v1"], base, w4, phases)
    u1 = p.eps * ((p.c / p.rho0) * I_s + p.eps * v1_s)
    u = [Field(phys_grid, u1)]
    for wt in tables["w"]:
        u.append(Field(phys_grid, p.eps**1.5 * _sample(wt, base, w4, phases)))
    return ReconstructedState(Field(phys_grid, rho), tuple(u), t=t)


def paraxial_operator_identity_check(
    test_profile: sp.Expr,
    p: ModelParams,
    n_samples: int = 5,
) -> float:
    """Max discrepancy between the wave operator applied to a paraxially
    composed profile and its exact two-term expansion.

    ``test_profile`` is a sympy expression in symbols ``tau``, ``z`` and
    optionally ``y``.  Both sides are evaluated symbolically through the
    substitution tau -> t - x1/c, z -> eps x1, y -> sqrt(eps) xp and
    sampled on a small lattice; the output is pure roundoff when the
    identity holds.
    """
    validate_params(p)
    tau_s, z_s, y_s = sp.symbols("tau z y")
    x1_s, xp_s, t_s = sp.symbols("x1 xp t")
    subs = {tau_s: t_s - x1_s / p.c, z_s: p.eps * x1_s, y_s: sp.sqrt(p.eps) * xp_s}

    composed = test_profile.subs(subs)
    lhs = sp.diff(composed, t_s, 2) - p.c**2 * (
        sp.diff(composed, x1_s, 2) + sp.diff(composed, xp_s, 2)
    )
    rhs_profile = (
        p.eps * (
            2 * p.c * sp.diff(test_profile, tau_s, z_s)
            - p.c**2 * sp.diff(test_profile, y_s, 2)
        )
        - p.eps**2 * p.c**2 * sp.diff(test_profile, z_s, 2)
    )
    rhs = rhs_profile.subs(subs)

    f_lhs = sp.lambdify((x1_s, xp_s, t_s), lhs, "numpy")
    f_rhs = sp.lambdify((x1_s, xp_s, t_s), rhs, "numpy")
    pts = np.linspace(-1.3, 1.7, n_samples)
    X1, XP, T = np.meshgrid(pts, pts, pts, indexing="ij")
    a = np.broadcast_to(np.asarray(f_lhs(X1, XP, T), dtype=float), X1.shape)
    b = np.broadcast_to(np.asarray(f_rhs(X1, XP, T), dtype=float), X1.shape)
    return float(np.max(np.abs(a - b)))
