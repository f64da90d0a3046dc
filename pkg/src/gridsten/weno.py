"""Periodic 2D advection term -(u phi_x + v phi_y) with fifth-order HJ-WENO derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import Grid2D, split_range, wrap
from .workers import WorkerPool, nonempty

EPS = 1e-6
HALO = 3


@dataclass
class VelocityField:
    u: Grid2D
    v: Grid2D

    def __post_init__(self) -> None:
        if self.u.shape != self.v.shape:
            raise ValueError(f"velocity components differ in shape: {self.u.shape} vs {self.v.shape}")
        if not (np.all(np.isfinite(self.u.values)) and np.all(np.isfinite(self.v.values))):
            raise ValueError("velocities must be finite")


@njit(nogil=True, cache=True)
def weno5(v1, v2, v3, v4, v5):
    """Blend the three third-order candidates from five one-sided differences."""
    p1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0
    p2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0
    p3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0
    s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3) ** 2 + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3) ** 2
    s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5) ** 2 + 0.25 * (3.0 * v3 - 4.0 * v4 + v5) ** 2
    a1 = 0.1 / (EPS + s1) ** 2
    a2 = 0.6 / (EPS + s2) ** 2
    a3 = 0.3 / (EPS + s3) ** 2
    return (a1 * p1 + a2 * p2 + a3 * p3) / (a1 + a2 + a3)


@njit(nogil=True, cache=True)
def upwind_derivative(f0, f1, f2, f3, f4, f5, f6, h, left_biased):
    """Derivative at f3 from the seven samples f0..f6 centred on it."""
    if left_biased:
        return weno5(
            (f1 - f0) / h, (f2 - f1) / h, (f3 - f2) / h, (f4 - f3) / h, (f5 - f4) / h
        )
    return weno5(
        (f6 - f5) / h, (f5 - f4) / h, (f4 - f3) / h, (f3 - f2) / h, (f2 - f1) / h
    )


@njit(nogil=True, cache=True)
def _derivative_rows(phi, u, v, dx, dy, rowidx, colidx, phix, phiy, j0, j1):
    nx = phi.shape[1]
    for j in range(j0, j1):
        r0 = rowidx[j]
        r1 = rowidx[j + 1]
        r2 = rowidx[j + 2]
        r4 = rowidx[j + 4]
        r5 = rowidx[j + 5]
        r6 = rowidx[j + 6]
        for i in range(nx):
            c0 = colidx[i]
            c1 = colidx[i + 1]
            c2 = colidx[i + 2]
            c4 = colidx[i + 4]
            c5 = colidx[i + 5]
            c6 = colidx[i + 6]
            # zero velocity falls back to the left-biased stencil
            phix[j, i] = upwind_derivative(
                phi[j, c0], phi[j, c1], phi[j, c2], phi[j, i], phi[j, c4], phi[j, c5], phi[j, c6],
                dx, u[j, i] >= 0.0,
            )
            phiy[j, i] = upwind_derivative(
                phi[r0, i], phi[r1, i], phi[r2, i], phi[j, i], phi[r4, i], phi[r5, i], phi[r6, i],
                dy, v[j, i] >= 0.0,
            )


@njit(nogil=True, cache=True)
def _advect_rows(u, v, phix, phiy, out, j0, j1):
    nx = u.shape[1]
    for j in range(j0, j1):
        for i in range(nx):
            out[j, i] = -(u[j, i] * phix[j, i] + v[j, i] * phiy[j, i])


def _index_map(n: int) -> np.ndarray:
    return np.array([wrap(m - HALO, n) for m in range(n + 2 * HALO)], dtype=np.uint64)


def weno_derivatives(
    phi: Grid2D, vel: VelocityField, num_tiles: int = 1, pool: WorkerPool | None = None
) -> tuple[Grid2D, Grid2D]:
    """Upwind derivatives (phi_x, phi_y), biased by the sign of (u, v)."""
    if phi.shape != vel.u.shape:
        raise ValueError(f"velocity shape {vel.u.shape} does not match field {phi.shape}")
    if phi.nx < 2 * HALO + 1 or phi.ny < 2 * HALO + 1:
        raise ValueError("WENO5 needs nx, ny >= 7")
    pool = pool or WorkerPool(1)
    phix, phiy = phi.like(), phi.like()
    rowidx, colidx = _index_map(phi.ny), _index_map(phi.nx)
    f, u, v = phi.field, vel.u.field, vel.v.field
    ranges = nonempty(split_range(phi.ny, min(num_tiles, phi.ny)))
    pool.run(
        lambda j0, j1: _derivative_rows(
            f, u, v, phi.dx, phi.dy, rowidx, colidx, phix.field, phiy.field, j0, j1
        ),
        ranges,
    )
    return phix, phiy


def weno_advect(
    phi: Grid2D, vel: VelocityField, num_tiles: int = 1, num_workers: int = 1
) -> Grid2D:
    """-(u phi_x + v phi_y) on a periodic grid."""
    with WorkerPool(num_workers) as pool:
        phix, phiy = weno_derivatives(phi, vel, num_tiles, pool)
        out = phi.like()
        ranges = nonempty(split_range(phi.ny, min(num_tiles, phi.ny)))
        pool.run(
            lambda j0, j1: _advect_rows(
                vel.u.field, vel.v.field, phix.field, phiy.field, out.field, j0, j1
            ),
            ranges,
        )
    return out
