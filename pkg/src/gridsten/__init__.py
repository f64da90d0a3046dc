"""Parallel 2D finite-difference stencils, batched pentadiagonal solves and a
Cahn-Hilliard BDF2-ADI solver built on them."""

from .cahn_hilliard import CHParams, CHState, MemorySink, Simulation, adi_step, initial_condition, run
from .diagnostics import Diagnostics, SaturationError, k1_metric, measure, s_metric, simpson_mean
from .grid import BoundaryMode, Extents, Grid2D, TilePlan, linear_index, make_tiles, transpose, wrap
from .penta import (
    PentaBatch,
    PentaSolver,
    RhsBatch,
    ZeroPivotError,
    build_hyperdiffusion_operator,
    deinterleave,
    interleave,
    solve_batch,
    solve_periodic_batch,
)
from .stencil import (
    Direction,
    FunctionStencil,
    StencilPlan,
    WeightStencil,
    apply_function_at,
    apply_weights_at,
    compute,
    create_plan,
    destroy_plan,
    swap_plan,
)
from .weno import VelocityField, weno_advect

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
