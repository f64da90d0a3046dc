"""Coarsening measures for periodic fields: Simpson averages, s(t) and k1(t)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid2D


class SaturationError(ArithmeticError):
    """<C^2> reached 1, where s = 1 / (1 - <C^2>) blows up."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_pow2(g: Grid2D) -> None:
    if not (is_power_of_two(g.nx) and is_power_of_two(g.ny)):
        raise ValueError(f"FFT needs power-of-two dimensions, got {g.nx}x{g.ny}")


def fft2d(g: Grid2D) -> np.ndarray:
    """Unnormalised forward DFT, shape ``(ny, nx)``."""
    _check_pow2(g)
    return np.fft.fft2(g.field)


def ifft2d(spectrum: np.ndarray, dx: float = 1.0, dy: float = 1.0) -> Grid2D:
    """Inverse of :func:`fft2d`; the imaginary part is dropped."""
    ny, nx = spectrum.shape
    if not (is_power_of_two(nx) and is_power_of_two(ny)):
        raise ValueError(f"FFT needs power-of-two dimensions, got {nx}x{ny}")
    return Grid2D.from_array(np.fft.ifft2(spectrum).real, dx, dy)


def simpson_weights(n: int) -> np.ndarray:
    """Composite Simpson weights on a periodic line, normalised to sum 1.

    The wrapped first sample closes the interval, so with n even the end
    weights 1 + 1 merge into 2 and the pattern is 2, 4, 2, 4, ...
    """
    if n % 2:
        raise ValueError(f"Simpson's rule on a periodic grid needs an even count, got {n}")
    w = np.empty(n)
    w[0::2] = 2.0
    w[1::2] = 4.0
    return w / (3.0 * n)


def simpson_mean(g: Grid2D) -> float:
    """Domain average of ``g`` by tensor-product Simpson on the periodic box."""
    wx = simpson_weights(g.nx)
    wy = simpson_weights(g.ny)
    return float(wy @ g.field @ wx)


def s_metric(c: Grid2D) -> float:
    m2 = simpson_mean(Grid2D(c.nx, c.ny, c.dx, c.dy, c.values * c.values))
    if m2 >= 1.0 - 1e-12:
        raise SaturationError(f"<C^2> = {m2!r} is too close to 1")
    return 1.0 / (1.0 - m2)


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Signed wavenumbers in FFT order; integers on a 2*pi box, range [-n/2, n/2)."""
    return (2.0 * math.pi / length) * np.fft.fftfreq(n, d=1.0 / n)


def k1_metric(c: Grid2D, lx: float | None = None, ly: float | None = None) -> float:
    """Spectrally weighted mean wavenumber sum|C^|^2 / sum |k|^-1 |C^|^2, k = 0 excluded."""
    lx = c.nx * c.dx if lx is None else lx
    ly = c.ny * c.dy if ly is None else ly
    power = np.abs(fft2d(c)) ** 2
    kx = wavenumbers(c.nx, lx)
    ky = wavenumbers(c.ny, ly)
    kmag = np.hypot(ky[:, None], kx[None, :])
    power[0, 0] = 0.0
    kmag[0, 0] = 1.0
    num = power.sum()
    den = (power / kmag).sum()
    if den == 0.0:
        raise ZeroDivisionError("k1 is undefined for a field with no non-constant modes")
    return float(num / den)


@dataclass(frozen=True)
class Diagnostics:
    t: float
    s: float
    k1_inv: float


def measure(c: Grid2D, t: float, lx: float | None = None, ly: float | None = None) -> Diagnostics:
    try:
        k1_inv = 1.0 / k1_metric(c, lx, ly)
    except ZeroDivisionError:
        # flat field: no length scale to report
        k1_inv = math.nan
    return Diagnostics(t, s_metric(c), k1_inv)
