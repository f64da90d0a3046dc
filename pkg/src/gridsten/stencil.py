"""Directional weight and function stencils applied over tiles.

Usage follows a create / compute / swap / destroy lifecycle::

    plan = create_plan(Direction.X, BoundaryMode.PERIODIC, sten, (old, new))
    plan.compute()
    plan.swap()
    plan.destroy()

Each output point is a sum over its window taken in row-major window order
(left to right, then top to bottom), so results do not depend on how rows
are split into tiles or how many workers run them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher

from . import _kernels
from .grid import BoundaryMode, Extents, Grid2D, TilePlan, make_tiles, wrap
from .workers import WorkerPool, nonempty


class Direction(enum.Enum):
    X = "x"
    Y = "y"
    XY = "xy"


HOST = "host"
DEVICE = "device"

# Standard central second-derivative weights (times 1/dx^2).
SECOND_ORDER_D2 = (1.0, -2.0, 1.0)
EIGHTH_ORDER_D2 = (
    -1.0 / 560.0,
    8.0 / 315.0,
    -1.0 / 5.0,
    8.0 / 5.0,
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
)
# Second-order d^4/dx^2dy^2, row-major 3x3, times 1/(dx^2 dy^2).
CROSS_D2XD2Y = (1.0, -2.0, 1.0, -2.0, 4.0, -2.0, 1.0, -2.0, 1.0)


@dataclass(frozen=True)
class WeightStencil:
    ext: Extents
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.weights, dtype=np.float64).reshape(-1)
        if w.size == 0:
            raise ValueError("stencil has no weights")
        if w.size != self.ext.size:
            raise ValueError(
                f"{w.size} weights do not fill a {self.ext.height}x{self.ext.width} window"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("stencil weights must be finite")
        object.__setattr__(self, "weights", w)

    @classmethod
    def x(cls, weights, left: int, right: int) -> "WeightStencil":
        return cls(Extents(left=left, right=right), weights)

    @classmethod
    def y(cls, weights, top: int, bottom: int) -> "WeightStencil":
        return cls(Extents(top=top, bottom=bottom), weights)


WindowFn = Callable[[np.ndarray, np.ndarray, int], float]


@dataclass(frozen=True)
class FunctionStencil:
    """Stencil evaluated by ``fn(window, coe, row_stride) -> float``.

    ``window`` holds the gathered window in row-major order with
    ``row_stride`` entries per window row. Passing a numba ``@njit`` function
    selects the compiled path; any other callable runs in the interpreter.
    """

    ext: Extents
    fn: WindowFn
    coe: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coe", np.ascontiguousarray(self.coe, dtype=np.float64).reshape(-1)
        )
        if not callable(self.fn):
            raise TypeError("fn must be callable")

    @property
    def num_coe(self) -> int:
        return self.coe.size

    @property
    def compiled(self) -> bool:
        return isinstance(self.fn, CPUDispatcher)

    @classmethod
    def from_weights(cls, sten: WeightStencil) -> "FunctionStencil":
        """Function stencil that reproduces a weight stencil bit for bit."""
        return cls(sten.ext, weighted_sum, sten.weights.copy())


@njit(nogil=True, cache=True)
def weighted_sum(win, coe, row_stride):
    acc = 0.0
    for k in range(coe.size):
        acc += coe[k] * win[k]
    return acc


Stencil = Union[WeightStencil, FunctionStencil]


def _check_extents(direction: Direction, ext: Extents, nx: int, ny: int) -> None:
    if direction is Direction.X and (ext.top or ext.bottom):
        raise ValueError("an x-direction stencil cannot reach in y")
    if direction is Direction.Y and (ext.left or ext.right):
        raise ValueError("a y-direction stencil cannot reach in x")
    if ext.left + ext.right >= nx:
        raise ValueError(f"x extents {ext.left}+{ext.right} do not fit nx={nx}")
    if ext.top + ext.bottom >= ny:
        raise ValueError(f"y extents {ext.top}+{ext.bottom} do not fit ny={ny}")


def _index_map(n: int, before: int, after: int) -> np.ndarray:
    # entry m maps window coordinate m - before to a grid index (wrapped);
    # unsigned so compiled kernels skip negative-index handling
    return np.array([wrap(m - before, n) for m in range(n + before + after)], dtype=np.uint64)


class StencilPlan:
    """Validated stencil application bound to an input and an output grid."""

    def __init__(
        self,
        direction: Direction,
        mode: BoundaryMode,
        stencil: Stencil,
        inp: Grid2D,
        out: Grid2D,
        num_tiles: int = 1,
        num_workers: int = 1,
        pool: WorkerPool | None = None,
    ):
        if not isinstance(stencil, (WeightStencil, FunctionStencil)):
            raise TypeError(f"unsupported stencil type {type(stencil).__name__}")
        if inp is out or np.shares_memory(inp.values, out.values):
            raise ValueError("input and output must be distinct buffers")
        if inp.shape != out.shape:
            raise ValueError(f"grid shapes differ: {inp.shape} vs {out.shape}")
        ext = stencil.ext
        _check_extents(direction, ext, inp.nx, inp.ny)

        self.direction = direction
        self.mode = mode
        self.stencil = stencil
        self.input = inp
        self.output = out
        self.tiles: TilePlan = make_tiles(inp.ny, num_tiles, ext)

        if pool is None:
            self._pool = WorkerPool(num_workers)
            self._owns_pool = True
        else:
            self._pool = pool
            self._owns_pool = False
        self.num_workers = self._pool.num_workers

        nx, ny = inp.nx, inp.ny
        if mode is BoundaryMode.PERIODIC:
            self._irange = (0, nx)
            jlo, jhi = 0, ny
        else:
            self._irange = (ext.left, nx - ext.right)
            jlo, jhi = ext.top, ny - ext.bottom
        self._jobs = nonempty((max(a, jlo), min(b, jhi)) for a, b in self.tiles)
        self._rowidx = _index_map(ny, ext.top, ext.bottom)
        self._colidx = _index_map(nx, ext.left, ext.right)
        # one scratch row per tile so concurrent tiles never share memory
        self._scratch = np.zeros((self.tiles.num_tiles, max(nx, ext.size)))
        self._slot = {rng: k for k, rng in enumerate(self._jobs)}
        self.destroyed = False

    @property
    def num_tiles(self) -> int:
        return self.tiles.num_tiles

    def compute(self, residency: str = HOST) -> None:
        """Apply the stencil from ``input`` into ``output``.

        ``residency`` is accepted for API parity (HOST/DEVICE) and ignored.
        """
        if self.destroyed:
            raise RuntimeError("plan has been destroyed")
        if residency not in (HOST, DEVICE):
            raise ValueError(f"residency must be {HOST!r} or {DEVICE!r}")
        src = self.input.field
        dst = self.output.field
        ext = self.stencil.ext
        wh, ww = ext.height, ext.width
        i0, i1 = self._irange
        rowidx, colidx = self._rowidx, self._colidx
        scratch = self._scratch
        slot = self._slot
        sten = self.stencil

        if isinstance(sten, WeightStencil):
            w = sten.weights

            def work(j0, j1):
                _kernels.weight_rows(
                    src, dst, w, wh, ww, ext.left, rowidx, colidx, j0, j1, i0, i1,
                    scratch[slot[(j0, j1)]],
                )

        elif sten.compiled:
            fn, coe = sten.fn, sten.coe

            def work(j0, j1):
                win = scratch[slot[(j0, j1)], : wh * ww]
                _kernels.function_rows(src, dst, fn, coe, wh, ww, rowidx, colidx, j0, j1, i0, i1, win)

        else:
            fn, coe = sten.fn, sten.coe
            coe_view = coe.view()
            coe_view.flags.writeable = False

            def work(j0, j1):
                for j in range(j0, j1):
                    rows = rowidx[j : j + wh]
                    for i in range(i0, i1):
                        win = src[np.ix_(rows, colidx[i : i + ww])].reshape(-1)
                        win.flags.writeable = False
                        dst[j, i] = fn(win, coe_view, ww)

        self._pool.run(work, self._jobs)

    def swap(self) -> None:
        if self.destroyed:
            raise RuntimeError("plan has been destroyed")
        self.input, self.output = self.output, self.input

    def destroy(self) -> None:
        """Release plan-owned resources; the bound grids stay with the caller."""
        if self.destroyed:
            return
        if self._owns_pool:
            self._pool.shutdown()
        self._scratch = None
        self._jobs = []
        self.input = self.output = None  # type: ignore[assignment]
        self.destroyed = True


def create_plan(
    direction: Direction,
    mode: BoundaryMode,
    stencil: Stencil,
    grids: tuple[Grid2D, Grid2D],
    num_tiles: int = 1,
    num_workers: int = 1,
    pool: WorkerPool | None = None,
) -> StencilPlan:
    inp, out = grids
    return StencilPlan(direction, mode, stencil, inp, out, num_tiles, num_workers, pool)


def compute(plan: StencilPlan, residency: str = HOST) -> None:
    plan.compute(residency)


def swap_plan(plan: StencilPlan) -> None:
    plan.swap()


def destroy_plan(plan: StencilPlan) -> None:
    plan.destroy()


def _window_source(g: Grid2D, ext: Extents, i: int, j: int, mode: BoundaryMode):
    rows = [j - ext.top + q for q in range(ext.height)]
    cols = [i - ext.left + p for p in range(ext.width)]
    if mode is BoundaryMode.PERIODIC:
        return [wrap(r, g.ny) for r in rows], [wrap(c, g.nx) for c in cols]
    if rows[0] < 0 or rows[-1] >= g.ny or cols[0] < 0 or cols[-1] >= g.nx:
        raise IndexError(f"window at ({i}, {j}) leaves the non-periodic domain")
    return rows, cols


def apply_weights_at(g: Grid2D, sten: WeightStencil, i: int, j: int, mode: BoundaryMode) -> float:
    """Serial reference value of a weight stencil at one point."""
    rows, cols = _window_source(g, sten.ext, i, j, mode)
    f = g.field
    w = sten.weights
    acc = 0.0
    k = 0
    for r in rows:
        for c in cols:
            acc += float(w[k]) * float(f[r, c])
            k += 1
    return acc


def apply_function_at(g: Grid2D, sten: FunctionStencil, i: int, j: int, mode: BoundaryMode) -> float:
    """Serial reference value of a function stencil at one point."""
    rows, cols = _window_source(g, sten.ext, i, j, mode)
    win = g.field[np.ix_(rows, cols)].reshape(-1).copy()
    return float(sten.fn(win, sten.coe, sten.ext.width))


def frame_mask(nx: int, ny: int, ext: Extents) -> np.ndarray:
    """True on the cells a non-periodic compute leaves untouched."""
    mask = np.ones((ny, nx), dtype=bool)
    mask[ext.top : ny - ext.bottom, ext.left : nx - ext.right] = False
    return mask
