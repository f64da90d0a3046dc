"""Small worked examples of the stencil engine and the WENO operator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .grid import BoundaryMode, Extents, Grid2D
from .stencil import (
    CROSS_D2XD2Y,
    EIGHTH_ORDER_D2,
    Direction,
    FunctionStencil,
    WeightStencil,
    create_plan,
)
from .weno import VelocityField, weno_advect


@dataclass
class DemoResult:
    name: str
    expected: Grid2D
    computed: Grid2D
    mask: np.ndarray  # cells the demo actually computes
    untouched_left: int = 0
    untouched_right: int = 0

    @property
    def max_error(self) -> float:
        diff = self.computed.field - self.expected.field
        return float(np.max(np.abs(diff[self.mask])))

    def summary(self, samples: int = 6) -> str:
        lines = [f"{self.name}: {self.computed.nx}x{self.computed.ny}, max error {self.max_error:.3e}"]
        if self.untouched_left or self.untouched_right:
            lines.append(
                f"untouched cells: {self.untouched_left} left, {self.untouched_right} right"
            )
        lines.append("i  computed  expected")
        row_c, row_e = self.computed.field[0], self.expected.field[0]
        nx = self.computed.nx
        picks = sorted(set(list(range(min(samples, nx))) + list(range(max(0, nx - samples), nx))))
        for i in picks:
            shown = "untouched" if not self.mask[0, i] else f"{row_c[i]:.17g}"
            lines.append(f"{i} {shown} {row_e[i]:.17g}")
        return "\n".join(lines)


def _sin_grid(nx: int, ny: int) -> Grid2D:
    dx = 2 * math.pi / nx
    dy = 2 * math.pi / ny
    x = np.arange(nx) * dx
    return Grid2D.from_array(np.tile(np.sin(x), (ny, 1)), dx, dy)


def demo_x(nx: int = 1024, ny: int = 512, num_tiles: int = 1, num_workers: int = 1) -> DemoResult:
    """Eighth-order d2/dx2 of sin(x), non-periodic: 4 cells each side stay untouched."""
    g = _sin_grid(nx, ny)
    out = g.like()
    out.values[:] = np.nan
    sten = WeightStencil.x(np.array(EIGHTH_ORDER_D2) / g.dx**2, 4, 4)
    plan = create_plan(Direction.X, BoundaryMode.NON_PERIODIC, sten, (g, out), num_tiles, num_workers)
    plan.compute()
    plan.destroy()
    mask = np.zeros((ny, nx), dtype=bool)
    mask[:, 4 : nx - 4] = True
    untouched = np.isnan(out.field[0])
    left = int(np.argmin(untouched)) if not untouched.all() else nx
    right = int(np.argmin(untouched[::-1])) if not untouched.all() else nx
    expected = Grid2D(nx, ny, g.dx, g.dy, -g.values)
    return DemoResult("demo-x", expected, out, mask, left, right)


@njit(nogil=True, cache=True)
def central_difference(win, coe, row_stride):
    return (win[0] - 2.0 * win[1] + win[2]) * coe[0]


def demo_x_fun(nx: int = 1024, ny: int = 512, num_tiles: int = 1, num_workers: int = 1) -> DemoResult:
    """Periodic d2/dx2 of sin(x) through a user-supplied window function."""
    g = _sin_grid(nx, ny)
    out = g.like()
    sten = FunctionStencil(Extents(left=1, right=1), central_difference, [1.0 / g.dx**2])
    plan = create_plan(Direction.X, BoundaryMode.PERIODIC, sten, (g, out), num_tiles, num_workers)
    plan.compute()
    plan.destroy()
    expected = Grid2D(nx, ny, g.dx, g.dy, -g.values)
    return DemoResult("demo-x-fun", expected, out, np.ones((ny, nx), dtype=bool))


def demo_xy(nx: int = 256, ny: int = 256, num_tiles: int = 1, num_workers: int = 1) -> DemoResult:
    """Cross derivative d4/dx2dy2 of sin(x) sin(y), periodic (corners wrap)."""
    dx, dy = 2 * math.pi / nx, 2 * math.pi / ny
    x = np.arange(nx) * dx
    y = np.arange(ny) * dy
    f = np.outer(np.sin(y), np.sin(x))
    g = Grid2D.from_array(f, dx, dy)
    out = g.like()
    sten = WeightStencil(Extents(1, 1, 1, 1), np.array(CROSS_D2XD2Y) / (dx * dx * dy * dy))
    plan = create_plan(Direction.XY, BoundaryMode.PERIODIC, sten, (g, out), num_tiles, num_workers)
    plan.compute()
    plan.destroy()
    return DemoResult("demo-xy", g.copy(), out, np.ones((ny, nx), dtype=bool))


def demo_weno(nx: int = 128, ny: int = 128, num_tiles: int = 1, num_workers: int = 1) -> DemoResult:
    """-(u phi_x + v phi_y) for phi = sin(x) + cos(y) in a rotating velocity field."""
    dx, dy = 2 * math.pi / nx, 2 * math.pi / ny
    x = np.arange(nx) * dx
    y = np.arange(ny) * dy
    X, Y = np.meshgrid(x, y)
    phi = Grid2D.from_array(np.sin(X) + np.cos(Y), dx, dy)
    u = Grid2D.from_array(np.sin(Y), dx, dy)
    v = Grid2D.from_array(-np.sin(X), dx, dy)
    out = weno_advect(phi, VelocityField(u, v), num_tiles, num_workers)
    exact = -(u.field * np.cos(X) - v.field * np.sin(Y))
    return DemoResult("weno-demo", Grid2D.from_array(exact, dx, dy), out, np.ones((ny, nx), dtype=bool))
