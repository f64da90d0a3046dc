import math

import numpy as np
import pytest

from gridsten.cahn_hilliard import (
    CHParams,
    CHState,
    MemorySink,
    Simulation,
    assemble_rhs,
    biharmonic,
    biharmonic_weights,
    initial_condition,
    laplacian_weights,
    nonlinear_term,
    run,
)
from gridsten.grid import BoundaryMode, Extents, Grid2D
from gridsten.stencil import Direction, WeightStencil, create_plan

from conftest import random_grid


def box(n, ny=None):
    ny = ny or n
    dx, dy = 2 * math.pi / n, 2 * math.pi / ny
    X, Y = np.meshgrid(np.arange(n) * dx, np.arange(ny) * dy)
    return X, Y, dx, dy


def lap_symbol(theta, h):
    return (2 * math.cos(theta) - 2) / h**2


def quartic_symbol(theta, h):
    return (6 - 8 * math.cos(theta) + 2 * math.cos(2 * theta)) / h**4


def biharmonic_symbol(kx, ky, dx, dy):
    cross = (2 - 2 * math.cos(kx * dx)) * (2 - 2 * math.cos(ky * dy)) / (dx * dx * dy * dy)
    return quartic_symbol(kx * dx, dx) + 2 * cross + quartic_symbol(ky * dy, dy)


def params(n=32, **kw):
    kw.setdefault("T", 1.0)
    return CHParams.with_dt_factor(kw.pop("dt_factor", 0.1), nx=n, ny=n, **kw)


# -- parameters and initial condition --------------------------------------------


def test_params_defaults_and_validation():
    p = CHParams()
    assert (p.D, p.gamma, p.nx, p.ny, p.T, p.ic_amplitude) == (1.0, 0.01, 512, 512, 100.0, 0.1)
    assert p.dt == pytest.approx(0.1 * p.dx)
    assert p.lx == p.ly == 2 * math.pi
    for bad in ({"D": 0.0}, {"gamma": -1.0}, {"dt": 0.0}, {"T": -1.0}, {"nx": 48}, {"ny": 4}):
        with pytest.raises(ValueError):
            CHParams(**bad)


def test_num_steps():
    p = CHParams(nx=8, ny=8, dt=0.1, T=1.0)
    assert p.num_steps == 10
    assert CHParams(nx=8, ny=8, dt=0.3, T=1.0).num_steps == 4
    assert CHParams(nx=8, ny=8, dt=0.5, T=0.5).num_steps == 1


def test_initial_condition_properties():
    p = CHParams()
    c = initial_condition(p)
    assert c.shape == (512, 512)
    assert np.max(np.abs(c.values)) <= 0.1
    assert abs(c.values.mean()) <= 3 * (0.1 / math.sqrt(3)) / 512
    assert c.values.tobytes() == initial_condition(p).values.tobytes()
    other = initial_condition(CHParams(seed=2))
    assert other.values.tobytes() != c.values.tobytes()
    assert not np.any(initial_condition(CHParams(nx=8, ny=8, ic_amplitude=0.0)).values)


# -- stencil terms ----------------------------------------------------------------


@pytest.mark.parametrize("kappa", [0.0, 0.7, -1.3, 0.123456789])
def test_terms_vanish_on_constants(kappa):
    g = Grid2D(32, 32, 2 * math.pi / 32, 2 * math.pi / 32, np.full(32 * 32, kappa))
    assert not np.any(nonlinear_term(g).values)
    assert not np.any(biharmonic(g).values)


def test_nonlinear_term_matches_two_path_oracle(rng):
    g = random_grid(rng, 16, 8, dx=0.3, dy=0.2)
    cubed = Grid2D(g.nx, g.ny, g.dx, g.dy, g.values * g.values * g.values - g.values)
    out = cubed.like()
    sten = WeightStencil(Extents(1, 1, 1, 1), laplacian_weights(g.dx, g.dy))
    plan = create_plan(Direction.XY, BoundaryMode.PERIODIC, sten, (cubed, out))
    plan.compute()
    plan.destroy()
    assert nonlinear_term(g).values.tobytes() == out.values.tobytes()


def test_nonlinear_term_linearised_symbol():
    X, Y, dx, dy = box(64)
    eps = 1e-4
    g = Grid2D.from_array(eps * np.sin(X), dx, dy)
    # lap(c^3 - c) = -lap(c) + O(eps^3)
    expected = -eps * lap_symbol(dx, dx) * np.sin(X)
    assert np.max(np.abs(nonlinear_term(g).field - expected)) <= 10 * eps**3


def test_biharmonic_weights():
    w = biharmonic_weights(0.5, 0.25).reshape(5, 5)
    assert np.count_nonzero(w) == 13
    assert w.sum() == 0.0
    assert w[2, 0] == 1 / 0.5**4 and w[0, 2] == 1 / 0.25**4
    assert w[1, 1] == 2 / (0.5**2 * 0.25**2)
    general = biharmonic_weights(2 * math.pi / 64, 2 * math.pi / 64)
    assert abs(general.sum()) <= 1e-12 * np.max(np.abs(general))


@pytest.mark.parametrize("kx,ky", [(1, 0), (0, 2), (3, 1)])
def test_biharmonic_symbol(kx, ky):
    X, Y, dx, dy = box(64, 32)
    g = Grid2D.from_array(np.sin(kx * X + ky * Y), dx, dy)
    expected = biharmonic_symbol(kx, ky, dx, dy) * g.field
    got = biharmonic(g).field
    scale = max(1.0, biharmonic_symbol(kx, ky, dx, dy))
    assert np.max(np.abs(got - expected)) <= 1e-9 * scale


def test_biharmonic_converges_to_continuum():
    X, Y, dx, dy = box(128)
    g = Grid2D.from_array(np.sin(X), dx, dy)
    assert np.max(np.abs(biharmonic(g).field - np.sin(X))) < 1e-3


# -- right-hand side -----------------------------------------------------------------


def straight_line_rhs(c, cp, cbar, D, gamma, dt, dx, dy):
    ny, nx = c.shape
    out = np.empty_like(c)
    for j in range(ny):
        for i in range(nx):
            def at(a, di, dj):
                return a[(j + dj) % ny, (i + di) % nx]

            d4x = (at(cbar, -2, 0) - 4 * at(cbar, -1, 0) + 6 * at(cbar, 0, 0) - 4 * at(cbar, 1, 0) + at(cbar, 2, 0)) / dx**4
            d4y = (at(cbar, 0, -2) - 4 * at(cbar, 0, -1) + 6 * at(cbar, 0, 0) - 4 * at(cbar, 0, 1) + at(cbar, 0, 2)) / dy**4
            d22 = 0.0
            for p in (-1, 0, 1):
                for q in (-1, 0, 1):
                    d22 += (1 if p else -2) * (1 if q else -2) * at(cbar, p, q)
            d22 /= dx * dx * dy * dy
            f = lambda di, dj: at(c, di, dj) ** 3 - at(c, di, dj)
            lap = (f(-1, 0) - 2 * f(0, 0) + f(1, 0)) / dx**2 + (f(0, -1) - 2 * f(0, 0) + f(0, 1)) / dy**2
            out[j, i] = (
                -2 / 3 * (c[j, i] - cp[j, i])
                - 2 / 3 * D * gamma * dt * (d4x + 2 * d22 + d4y)
                + 2 / 3 * D * dt * lap
            )
    return out


def test_assemble_rhs_matches_straight_line_oracle(rng):
    nx, ny, dx, dy = 8, 16, 0.7, 0.45
    c = Grid2D(nx, ny, dx, dy, rng.uniform(-1, 1, nx * ny))
    cp = Grid2D(nx, ny, dx, dy, rng.uniform(-1, 1, nx * ny))
    cbar = Grid2D(nx, ny, dx, dy, 2 * c.values - cp.values)
    D, gamma, dt = 1.3, 0.02, 0.05
    got = assemble_rhs(c, cp, cbar, D, gamma, dt).field
    ref = straight_line_rhs(c.field, cp.field, cbar.field, D, gamma, dt, dx, dy)
    assert np.max(np.abs(got - ref)) <= 1e-14 * max(1.0, np.max(np.abs(ref))) * 10


def test_assemble_rhs_special_cases(rng):
    n, h = 8, 0.5
    const = Grid2D(n, n, h, h, np.full(n * n, 0.4))
    assert not np.any(assemble_rhs(const, const.copy(), const.copy(), 1.0, 0.01, 0.1).values)
    c = random_grid(rng, n, n, h, h)
    cp = random_grid(rng, n, n, h, h)
    got = assemble_rhs(c, cp, c.copy(), 0.0, 0.01, 0.1).values
    assert got.tobytes() == (-2.0 / 3.0 * (c.values - cp.values)).tobytes()
    with pytest.raises(ValueError):
        assemble_rhs(c, Grid2D(4, 4, h, h), c, 1.0, 0.01, 0.1)


# -- time stepping -------------------------------------------------------------------


def test_zero_is_a_fixed_point():
    p = params(16)
    with Simulation(p, Grid2D(16, 16, p.dx, p.dy)) as sim:
        sim.advance(5)
        assert not np.any(sim.field.values)


@pytest.mark.parametrize("n", [16, 64, 128])
@pytest.mark.parametrize("kappa", [0.3, -0.7, 0.123456789, 1.0])
def test_constants_are_bitwise_equilibria(n, kappa):
    p = params(n)
    g = Grid2D(n, n, p.dx, p.dy, np.full(n * n, kappa))
    with Simulation(p, g, num_workers=2, num_tiles=3) as sim:
        sim.advance(4)
        assert sim.field.values.tobytes() == g.values.tobytes()


def test_state_rejects_mismatched_previous_level():
    with pytest.raises(ValueError):
        CHState.start(Grid2D(8, 8, 1.0, 1.0), Grid2D(16, 8, 1.0, 1.0))


def test_state_time_tracks_steps():
    p = params(16)
    with Simulation(p) as sim:
        sim.advance(3)
        assert sim.state.step == 3
        assert sim.state.time == 3 * p.dt


@pytest.mark.parametrize("kx,ky", [(1, 0), (1, 2)])
def test_single_mode_symbol_recurrence(kx, ky):
    p = CHParams.with_dt_factor(0.5, nx=32, ny=32, T=1.0, nonlinear=False)
    X, Y, dx, dy = box(32)
    eps = 0.01
    mode = np.cos(kx * X + ky * Y)
    c0 = Grid2D.from_array(eps * mode, dx, dy)

    b = biharmonic_symbol(kx, ky, dx, dy)
    scale = 2 / 3 * p.D * p.gamma * p.dt
    lx = 1 + scale * quartic_symbol(kx * dx, dx)
    ly = 1 + scale * quartic_symbol(ky * dy, dy)
    prev, cur = eps, eps
    with Simulation(p, c0) as sim:
        for _ in range(10):
            bar = 2 * cur - prev
            rhs = -2 / 3 * (cur - prev) - scale * b * bar
            prev, cur = cur, bar + rhs / (lx * ly)
            sim.step()
            assert np.max(np.abs(sim.field.field - cur * mode)) <= 1e-12 * eps


def test_linear_stability_at_large_time_step():
    p = CHParams.with_dt_factor(10.0, nx=64, ny=64, T=1000 * 10.0 * 2 * math.pi / 64, nonlinear=False)
    assert p.num_steps == 1000
    c0 = initial_condition(p)
    bound = np.max(np.abs(c0.values))
    with Simulation(p, c0) as sim:
        for _ in range(10):
            sim.advance(100)
            assert np.all(np.isfinite(sim.field.values))
            assert np.max(np.abs(sim.field.values)) <= bound


def _negated(g):
    return Grid2D(g.nx, g.ny, g.dx, g.dy, -g.values)


@pytest.mark.parametrize("nonlinear", [True, False])
def test_negation_equivariance(nonlinear):
    p = params(64, nonlinear=nonlinear, ic_amplitude=0.5)
    c0 = initial_condition(p)
    cm = initial_condition(CHParams.with_dt_factor(0.1, nx=64, ny=64, seed=9, ic_amplitude=0.5))
    with Simulation(p, c0, c_prev=cm) as a, Simulation(p, _negated(c0), c_prev=_negated(cm)) as b:
        for _ in range(3):
            a.step()
            b.step()
            assert b.field.values.tobytes() == (-a.field.values).tobytes()


def test_mass_conservation_short_run():
    p = params(64, T=2.0)
    c0 = initial_condition(p)
    with Simulation(p, c0) as sim:
        sim.advance(p.num_steps)
        assert abs(sim.field.values.mean() - c0.values.mean()) <= 1e-12


def test_tile_and_worker_invariance():
    p = params(64)
    c0 = initial_condition(p)
    ref = None
    for tiles in (1, 3, 8):
        for workers in (1, 4):
            with Simulation(p, c0, workers, tiles) as sim:
                sim.advance(3)
                got = sim.field.values.tobytes()
            ref = ref or got
            assert got == ref


# -- temporal accuracy -----------------------------------------------------------------

SMOOTH_MODES = ((1, 0, 0.3), (2, 1, 0.15), (0, 3, 0.09))


def smooth_field(p, t=0.0, linear=False):
    X, Y, dx, dy = box(p.nx)
    total = np.zeros_like(X)
    for kx, ky, a in SMOOTH_MODES:
        decay = math.exp(-p.D * p.gamma * biharmonic_symbol(kx, ky, dx, dy) * t) if linear else 1.0
        total += a * decay * np.cos(kx * X + ky * Y)
    return Grid2D.from_array(total, dx, dy)


def observed_orders(make_sim, dts, T):
    finals = []
    for dt in dts:
        with make_sim(dt, T) as sim:
            sim.advance(sim.params.num_steps)
            finals.append(sim.field.values.copy())
    diffs = [np.max(np.abs(a - b)) for a, b in zip(finals, finals[1:])]
    return [math.log2(a / b) for a, b in zip(diffs, diffs[1:])]


def test_second_order_with_two_level_start():
    # linear problem, C^(-1) taken from the exact semi-discrete solution
    def make(dt, T):
        p = CHParams(nx=32, ny=32, dt=dt, T=T, nonlinear=False)
        return Simulation(p, smooth_field(p, 0.0, True), c_prev=smooth_field(p, -dt, True))

    orders = observed_orders(make, [0.01, 0.005, 0.0025], 0.5)
    assert min(orders) >= 1.8


def test_default_start_costs_one_order():
    # C^(-1) := C^0 makes the first step advance by only 2/3 dt
    def make(dt, T):
        p = CHParams(nx=32, ny=32, dt=dt, T=T, nonlinear=False)
        return Simulation(p, smooth_field(p))

    orders = observed_orders(make, [0.01, 0.005, 0.0025], 0.5)
    assert all(0.9 <= q <= 1.1 for q in orders)


@pytest.mark.xfail(
    strict=True,
    reason="the scheme starts with C^(-1) = C^0 and lags the explicit nonlinear term by one "
    "level; both are O(dt) errors, so the observed order is 1",
)
def test_full_scheme_temporal_order():
    def make(dt, T):
        p = CHParams(nx=32, ny=32, dt=dt, T=T, gamma=0.05)
        return Simulation(p, smooth_field(p))

    orders = observed_orders(make, [0.01, 0.005, 0.0025], 0.5)
    assert min(orders) >= 1.8


# -- driver --------------------------------------------------------------------------


def test_run_single_step():
    p = CHParams(nx=8, ny=8, dt=0.05, T=0.05)
    sink = MemorySink()
    final = run(p, sink)
    assert [r.t for r in sink.rows] == [0.0, 0.05]
    with Simulation(p) as sim:
        sim.step()
        assert final.values.tobytes() == sim.field.values.tobytes()


def test_run_zero_amplitude_gives_unit_s():
    p = CHParams(nx=16, ny=16, dt=0.1, T=1.0, ic_amplitude=0.0)
    sink = MemorySink()
    run(p, sink)
    assert len(sink.rows) == 11
    assert all(r.s == 1.0 for r in sink.rows)


def test_run_cadence():
    p = CHParams(nx=16, ny=16, dt=0.1, T=1.0)
    sink = MemorySink()
    run(p, sink, diag_every=4, snapshot_every=3)
    assert [round(r.t / p.dt) for r in sink.rows] == [0, 4, 8, 10]
    assert [s[0] for s in sink.snapshots] == [0, 3, 6, 9, 10]
    with pytest.raises(ValueError):
        run(p, MemorySink(), diag_every=0)
    with pytest.raises(ValueError):
        run(p, MemorySink(), snapshot_every=0)


def test_run_is_deterministic():
    p = CHParams(nx=16, ny=16, dt=0.1, T=0.5)
    a, b = MemorySink(), MemorySink()
    run(p, a)
    run(p, b, num_workers=3, num_tiles=5)
    assert a.rows == b.rows


@pytest.mark.slow
def test_reference_configuration_coarsens():
    # full-size run (512^2 to T=100); several minutes on one core
    p = CHParams()
    sink = MemorySink()
    run(p, sink, diag_every=400)
    rows = [r for r in sink.rows if 5.0 <= r.t <= 80.0]
    t = np.log([r.t for r in rows])
    for series in ([r.s for r in rows], [r.k1_inv for r in rows]):
        slope = np.polyfit(t, np.log(series), 1)[0]
        assert abs(slope - 1 / 3) <= 0.1
