"""Periodic-axis calculus: Fourier differentiation, the zero-mean
antiderivative, and dealiased quadratic products.

All transforms are real-to-half-complex internally; callers only ever see
real Fields.  The 2/3-rule keeps modes |k| <= n//3 around quadratic
products, which is alias-free for a quadratic nonlinearity.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import Field, Grid
from .errors import GridMismatch, NonzeroMean

__all__ = [
    "PeriodicAxisHandle",
    "periodic_axis",
    "d_dx",
    "antiderivative_zero_mean",
    "dealiased_square",
]

MEAN_TOL = 1e-10


@dataclass(frozen=True)
class PeriodicAxisHandle:
    """Which Field axis spectral operations act along."""

    axis_index: int
    n: int
    length: float


def periodic_axis(grid: Grid, name: str) -> PeriodicAxisHandle:
    ax = grid.axis(name)
    if not ax.periodic:
        raise GridMismatch(f"axis {name!r} is not periodic")
    if ax.evolution:
        raise GridMismatch(f"axis {name!r} is an evolution axis")
    return PeriodicAxisHandle(grid.axis_index(name), ax.n, ax.length)


def _check(f: Field, ax: PeriodicAxisHandle) -> None:
    axes = f.grid.field_axes
    if ax.axis_index >= len(axes):
        raise GridMismatch(f"axis index {ax.axis_index} out of range")
    a = axes[ax.axis_index]
    if a.n != ax.n or not np.isclose(a.length, ax.length, rtol=1e-12):
        raise GridMismatch(
            f"handle (n={ax.n}, L={ax.length}) does not match axis "
            f"{a.name!r} (n={a.n}, L={a.length})"
        )


def _omega(ax: PeriodicAxisHandle) -> np.ndarray:
    # angular frequencies of the half-complex modes, k = 0 .. n/2
    return 2.0 * np.pi * np.arange(ax.n // 2 + 1) / ax.length


def _reshape_modes(modes: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = modes.size
    return modes.reshape(shape)


def d_dx_values(values: np.ndarray, ax: PeriodicAxisHandle, order: int = 1) -> np.ndarray:
    hat = np.fft.rfft(values, axis=ax.axis_index)
    sym = (1j * _omega(ax)) ** order
    if order % 2 == 1 and ax.n % 2 == 0:
        sym[-1] = 0.0  # odd derivative of the Nyquist mode is not representable
    hat *= _reshape_modes(sym, values.ndim, ax.axis_index)
    return np.fft.irfft(hat, n=ax.n, axis=ax.axis_index)


def d_dx(f: Field, ax: PeriodicAxisHandle, order: int = 1) -> Field:
    """Spectral derivative of the given order along a periodic axis."""
    if order < 1:
        raise ValueError(f"order must be positive, got {order}")
    _check(f, ax)
    return f.with_values(d_dx_values(f.values, ax, order))


def antiderivative_zero_mean_values(
    values: np.ndarray, ax: PeriodicAxisHandle, check_mean: bool = True
) -> np.ndarray:
    if check_mean:
        mean = np.mean(values, axis=ax.axis_index)
        scale = np.max(np.abs(values))
        if scale > 0 and np.max(np.abs(mean)) > MEAN_TOL * scale:
            raise NonzeroMean(
                f"mean magnitude {np.max(np.abs(mean)):.3e} exceeds "
                f"{MEAN_TOL:.0e} * max|f| = {MEAN_TOL * scale:.3e}"
            )
    hat = np.fft.rfft(values, axis=ax.axis_index)
    omega = _omega(ax)
    inv = np.zeros(omega.size, dtype=complex)
    inv[1:] = 1.0 / (1j * omega[1:])
    if ax.n % 2 == 0:
        inv[-1] = 0.0  # drop the Nyquist mode, as the odd derivative does
    hat *= _reshape_modes(inv, values.ndim, ax.axis_index)
    return np.fft.irfft(hat, n=ax.n, axis=ax.axis_index)


def antiderivative_zero_mean(f: Field, ax: PeriodicAxisHandle) -> Field:
    """Inverse of d_dx on the zero-mean periodic class; output mean is zero."""
    _check(f, ax)
    return f.with_values(antiderivative_zero_mean_values(f.values, ax))


def lowpass_values(values: np.ndarray, ax: PeriodicAxisHandle) -> np.ndarray:
    hat = np.fft.rfft(values, axis=ax.axis_index)
    cut = ax.n // 3
    keep = np.arange(ax.n // 2 + 1) <= cut
    hat *= _reshape_modes(keep.astype(float), values.ndim, ax.axis_index)
    return np.fft.irfft(hat, n=ax.n, axis=ax.axis_index)


def dealiased_square(f: Field, ax: PeriodicAxisHandle) -> Field:
    """Pointwise square with the 2/3-rule filter applied before and after."""
    _check(f, ax)
    g = lowpass_values(f.values, ax)
    return f.with_values(lowpass_values(g * g, ax))


def dealiased_product_nd(
    a: np.ndarray, b: np.ndarray, axes: tuple[PeriodicAxisHandle, ...]
) -> np.ndarray:
    """Product of two arrays, 2/3-filtered along every given axis."""
    fa, fb = a, b
    for ax in axes:
        fa = lowpass_values(fa, ax)
        fb = lowpass_values(fb, ax) if b is not a else fa
    out = fa * fb
    for ax in axes:
        out = lowpass_values(out, ax)
    return out
