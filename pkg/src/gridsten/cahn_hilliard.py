"""Cahn-Hilliard dC/dt = D lap(C^3 - C - gamma lap C) on a periodic box.

Time stepping is BDF2 with an ADI split of the implicit hyperdiffusion:

    Cbar = 2 C^n - C^(n-1)
    Lx w = -2/3 (C^n - C^(n-1)) - 2/3 D gamma dt biharm(Cbar) + 2/3 D dt lap(C^3 - C)^n
    Ly v = w
    C^(n+1) = Cbar + v

with Lx = I + 2/3 D gamma dt d_xxxx (Ly likewise). The x-sweep runs on the
transposed field so both sweeps see the interleaved batch layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numba import njit

from . import _kernels
from .diagnostics import Diagnostics, is_power_of_two, measure
from .grid import BoundaryMode, Extents, Grid2D, split_range
from .penta import PentaSolver, build_hyperdiffusion_operator
from .stencil import (
    CROSS_D2XD2Y,
    Direction,
    FunctionStencil,
    StencilPlan,
    WeightStencil,
)
from .workers import WorkerPool, nonempty

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CHParams:
    D: float = 1.0
    gamma: float = 0.01
    nx: int = 512
    ny: int = 512
    lx: float = TWO_PI
    ly: float = TWO_PI
    dt: float = 0.1 * TWO_PI / 512
    T: float = 100.0
    seed: int = 1
    ic_amplitude: float = 0.1
    nonlinear: bool = True

    def __post_init__(self) -> None:
        if not self.D > 0:
            raise ValueError(f"mobility D must be positive, got {self.D}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not is_power_of_two(n) or n < 8:
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")
        if self.ic_amplitude < 0:
            raise ValueError("ic_amplitude must be >= 0")

    @classmethod
    def with_dt_factor(cls, dt_factor: float = 0.1, **kw) -> "CHParams":
        """Parameters with ``dt = dt_factor * dx``."""
        nx = kw.get("nx", cls.nx)
        lx = kw.get("lx", cls.lx)
        return cls(dt=dt_factor * lx / nx, **kw)

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def num_steps(self) -> int:
        return max(1, math.ceil(self.T / self.dt - 1e-9))


def initial_condition(params: CHParams, rng: np.random.Generator | None = None) -> Grid2D:
    """i.i.d. uniform samples in [-a, a]; Philox stream keyed by ``params.seed``."""
    if rng is None:
        rng = np.random.Generator(np.random.Philox(params.seed))
    a = params.ic_amplitude
    vals = rng.uniform(-a, a, size=params.nx * params.ny) if a > 0 else np.zeros(params.nx * params.ny)
    return Grid2D(params.nx, params.ny, params.dx, params.dy, vals)


@njit(nogil=True, cache=True)
def laplacian_of_cubic(win, coe, row_stride):
    # coe holds the 3x3 Laplacian weights; the cubic is applied inside the window
    acc = 0.0
    for k in range(coe.size):
        w = win[k]
        acc += coe[k] * (w * w * w - w)
    return acc


def laplacian_weights(dx: float, dy: float) -> np.ndarray:
    """Five-point Laplacian laid out in a 3x3 window."""
    ix2 = 1.0 / (dx * dx)
    iy2 = 1.0 / (dy * dy)
    return np.array(
        [0.0, iy2, 0.0,
         ix2, -2.0 * ix2 - 2.0 * iy2, ix2,
         0.0, iy2, 0.0]
    )


def nonlinear_stencil(dx: float, dy: float) -> FunctionStencil:
    return FunctionStencil(Extents(1, 1, 1, 1), laplacian_of_cubic, laplacian_weights(dx, dy))


def biharmonic_weights(dx: float, dy: float) -> np.ndarray:
    """5x5 weights of d_xxxx + 2 d_xxyy + d_yyyy (13 non-zeros)."""
    dx2, dy2 = dx * dx, dy * dy
    ax = 1.0 / (dx2 * dx2)
    ay = 1.0 / (dy2 * dy2)
    axy = 1.0 / (dx2 * dy2)
    w = np.zeros((5, 5))
    w[2, :] += ax * np.array([1.0, -4.0, 6.0, -4.0, 1.0])
    w[:, 2] += ay * np.array([1.0, -4.0, 6.0, -4.0, 1.0])
    w[1:4, 1:4] += 2.0 * axy * np.array(CROSS_D2XD2Y).reshape(3, 3)
    return w.reshape(-1)


def biharmonic_stencil(dx: float, dy: float) -> WeightStencil:
    return WeightStencil(Extents(2, 2, 2, 2), biharmonic_weights(dx, dy))


def _apply(stencil, c: Grid2D) -> Grid2D:
    out = c.like()
    plan = StencilPlan(Direction.XY, BoundaryMode.PERIODIC, stencil, c, out)
    plan.compute()
    plan.destroy()
    return out


def nonlinear_term(c: Grid2D) -> Grid2D:
    """lap(c^3 - c) with the periodic five-point Laplacian."""
    return _apply(nonlinear_stencil(c.dx, c.dy), c)


def biharmonic(c: Grid2D) -> Grid2D:
    """Periodic second-order biharmonic of ``c``.

    The stencil is applied to ``c - c[0, 0]``, which leaves the result
    unchanged in exact arithmetic and makes it exactly zero on constants.
    """
    if c.nx < 5 or c.ny < 5:
        raise ValueError("biharmonic needs nx, ny >= 5")
    shifted = Grid2D(c.nx, c.ny, c.dx, c.dy, c.values - c.values[0])
    return _apply(biharmonic_stencil(c.dx, c.dy), shifted)


def rhs_coefficients(D: float, gamma: float, dt: float) -> tuple[float, float, float]:
    return (-2.0 / 3.0, -(2.0 / 3.0) * D * gamma * dt, (2.0 / 3.0) * D * dt)


def assemble_rhs(
    c_curr: Grid2D,
    c_prev: Grid2D,
    c_bar: Grid2D,
    D: float,
    gamma: float,
    dt: float,
) -> Grid2D:
    """Right-hand side of the x-sweep from freshly computed stencil terms."""
    if not c_curr.shape == c_prev.shape == c_bar.shape:
        raise ValueError("grids must share a shape")
    bih = biharmonic(c_bar)
    nl = nonlinear_term(c_curr)
    rhs = c_curr.like()
    a_diff, a_bih, a_nl = rhs_coefficients(D, gamma, dt)
    _kernels.assemble_rows(
        c_curr.field, c_prev.field, bih.field, nl.field, rhs.field, a_diff, a_bih, a_nl, 0, c_curr.ny
    )
    return rhs


@dataclass
class CHState:
    c_curr: Grid2D
    c_prev: Grid2D
    c_bar: Grid2D
    c_shift: Grid2D
    rhs: Grid2D
    w: Grid2D
    v: Grid2D
    bih: Grid2D
    nl: Grid2D
    xsweep: np.ndarray
    step: int = 0
    time: float = 0.0

    @classmethod
    def start(cls, c0: Grid2D, c_prev: Grid2D | None = None) -> "CHState":
        """Fresh state; C^(-1) defaults to C^0.

        Supplying ``c_prev`` (e.g. when restarting from two saved levels)
        avoids the first-order error of the default first step.
        """
        c = c0.copy()
        if c_prev is not None and c_prev.shape != c0.shape:
            raise ValueError("c_prev does not match c0")
        return cls(
            c_curr=c,
            c_prev=(c_prev if c_prev is not None else c0).copy(),
            c_bar=c.like(),
            c_shift=c.like(),
            rhs=c.like(),
            w=c.like(),
            v=c.like(),
            bih=c.like(),
            nl=c.like(),
            xsweep=np.zeros((c.nx, c.ny)),
        )


class ADIOperators:
    """Everything reused across steps: stencil plans, factorised sweeps, the pool.

    Plans are bound to the workspaces of one ``CHState``.
    """

    def __init__(self, params: CHParams, state: CHState, num_workers: int = 1, num_tiles: int = 1):
        nx, ny = params.nx, params.ny
        if state.c_curr.shape != (ny, nx):
            raise ValueError("state does not match params grid size")
        self.pool = WorkerPool(num_workers)
        self.num_tiles = num_tiles
        dx, dy = params.dx, params.dy
        self.bih_plan = StencilPlan(
            Direction.XY, BoundaryMode.PERIODIC, biharmonic_stencil(dx, dy),
            state.c_shift, state.bih, num_tiles, pool=self.pool,
        )
        self.nl_plan = StencilPlan(
            Direction.XY, BoundaryMode.PERIODIC, nonlinear_stencil(dx, dy),
            state.c_curr, state.nl, num_tiles, pool=self.pool,
        )
        scale = (2.0 / 3.0) * params.D * params.gamma * params.dt
        sigma_x = scale / dx**4
        sigma_y = scale / dy**4
        # x-sweep: ny systems of nx unknowns; y-sweep: nx systems of ny unknowns
        self.lx = PentaSolver(build_hyperdiffusion_operator(sigma_x, nx, ny, True), self.pool, num_tiles)
        self.ly = PentaSolver(build_hyperdiffusion_operator(sigma_y, ny, nx, True), self.pool, num_tiles)
        self.rows = nonempty(split_range(ny, min(num_tiles, ny)))
        self.cols = nonempty(split_range(nx, min(num_tiles, nx)))
        self.coefficients = rhs_coefficients(params.D, params.gamma, params.dt)
        self.nonlinear = params.nonlinear

    def close(self) -> None:
        self.bih_plan.destroy()
        self.nl_plan.destroy()
        self.pool.shutdown()


def adi_step(state: CHState, params: CHParams, ops: ADIOperators) -> None:
    """Advance ``state`` by one time step in place."""
    c = state.c_curr.field
    cp = state.c_prev.field
    cbar = state.c_bar.field
    shifted = state.c_shift.field
    rhs = state.rhs.field
    w = state.w.field
    v = state.v.field
    bih = state.bih.field
    nl = state.nl.field
    xt = state.xsweep
    run = ops.pool.run

    kappa = 2.0 * c[0, 0] - cp[0, 0]
    run(lambda j0, j1: _kernels.extrapolate_rows(c, cp, cbar, shifted, kappa, j0, j1), ops.rows)
    ops.bih_plan.compute()
    a_diff, a_bih, a_nl = ops.coefficients
    if ops.nonlinear:
        ops.nl_plan.compute()
    else:
        nl[...] = 0.0
        a_nl = 0.0
    run(lambda j0, j1: _kernels.assemble_rows(c, cp, bih, nl, rhs, a_diff, a_bih, a_nl, j0, j1), ops.rows)

    run(lambda j0, j1: _kernels.transpose_rows(rhs, xt, j0, j1), ops.rows)
    ops.lx.solve_inplace(xt)
    run(lambda i0, i1: _kernels.transpose_rows(xt, w, i0, i1), ops.cols)

    # row-major storage already is the y-sweep's interleaved layout
    np.copyto(v, w)
    ops.ly.solve_inplace(v)

    run(lambda j0, j1: _kernels.advance_rows(c, cp, cbar, v, j0, j1), ops.rows)
    state.step += 1
    state.time = state.step * params.dt


class Simulation:
    """A state plus its operators, stepped together."""

    def __init__(
        self,
        params: CHParams,
        c0: Grid2D | None = None,
        num_workers: int = 1,
        num_tiles: int = 1,
        c_prev: Grid2D | None = None,
    ):
        self.params = params
        if c0 is None:
            c0 = initial_condition(params)
        self.state = CHState.start(c0, c_prev)
        self.ops = ADIOperators(params, self.state, num_workers, num_tiles)

    @property
    def field(self) -> Grid2D:
        return self.state.c_curr

    def step(self) -> None:
        adi_step(self.state, self.params, self.ops)

    def advance(self, num_steps: int) -> None:
        state, params, ops = self.state, self.params, self.ops
        for _ in range(num_steps):
            adi_step(state, params, ops)

    def diagnostics(self) -> Diagnostics:
        return measure(self.state.c_curr, self.state.time, self.params.lx, self.params.ly)

    def close(self) -> None:
        self.ops.close()

    def __enter__(self) -> "Simulation":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class Sink(Protocol):
    def diagnostics(self, row: Diagnostics) -> None: ...

    def snapshot(self, step: int, t: float, grid: Grid2D) -> None: ...


@dataclass
class MemorySink:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def diagnostics(self, row: Diagnostics) -> None:
        self.rows.append(row)

    def snapshot(self, step: int, t: float, grid: Grid2D) -> None:
        self.snapshots.append((step, t, grid.copy()))


def run(
    params: CHParams,
    sink: Sink,
    diag_every: int = 1,
    snapshot_every: int | None = None,
    num_workers: int = 1,
    num_tiles: int = 1,
    c0: Grid2D | None = None,
) -> Grid2D:
    """Step from the initial condition to ``params.T``, reporting to ``sink``.

    Diagnostics are emitted at step 0, every ``diag_every`` steps and at the
    final step; snapshots likewise when ``snapshot_every`` is set. Returns the
    final field.
    """
    if diag_every < 1 or (snapshot_every is not None and snapshot_every < 1):
        raise ValueError("output cadences must be >= 1")
    nsteps = params.num_steps
    with Simulation(params, c0, num_workers, num_tiles) as sim:
        sink.diagnostics(sim.diagnostics())
        if snapshot_every:
            sink.snapshot(0, 0.0, sim.field)
        for n in range(1, nsteps + 1):
            sim.step()
            if n % diag_every == 0 or n == nsteps:
                sink.diagnostics(sim.diagnostics())
            if snapshot_every and (n % snapshot_every == 0 or n == nsteps):
                sink.snapshot(n, sim.state.time, sim.field)
        return sim.field.copy()

