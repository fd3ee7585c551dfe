import math

import numpy as np
import pytest

from harvestopt import model, simulate
from harvestopt.errors import InfeasiblePathError
from harvestopt.trajectory import (
    Clamp,
    CoordinationState,
    Grid,
    advance,
    build_path,
    node_control,
    trace_path,
)

from conftest import single_species

SWEEP_K = [-2.0, -1.6, -1.2, -0.8, -0.4, 0.0, 0.4, 0.8, 1.2, 1.6, 2.0]


def reference_coordination(path, i, sc, grid, companions, joint):
    """Coordination function at nodes 0..N-1, accumulated from the model-level API."""
    d = grid.step
    sp = sc.species[i]
    log_e, acc = 0.0, 0.0
    values = []
    for k in range(grid.n_steps):
        t = k * d
        x = companions[:, k].copy()
        x[i] = path.stocks[k]
        u = path.harvests[k]
        disc = math.exp(-sc.delta * t)
        values.append(disc * model.profit_dh(sp.econ, x[i], u) * math.exp(log_e) + acc)

        fx = model.growth_dx(sp.growth, x[i]) - model.interaction_dxi(sp.interactions, i, x)
        Fx = model.profit_dx(sp.econ, x[i], u)
        if joint:
            for j, other in enumerate(sc.species):
                if j == i:
                    continue
                xdot = (companions[j, k + 1] - companions[j, k]) / d
                hj = min(max(model.implied_harvest(j, sc, x, xdot), other.h_min), other.h_max)
                Fx -= model.profit_dh(other.econ, x[j], hj) * model.interaction_dxj(other.interactions, j, i, x)
        acc += disc * Fx * math.exp(log_e) * d
        log_e += fx * d
    return np.array(values)


# node control


def test_boundary_root_at_zero_harvest():
    sc = single_species()
    disc = math.exp(-0.05 * 2.0)
    K = disc * sc.species[0].econ.p0
    u, flag = node_control(K, CoordinationState(), 2.0, 300.0, [300.0], sc, 0)
    assert u == 0.0
    assert flag == Clamp.AT_MIN


def test_linear_closed_form_root():
    sc = single_species(p0=1.0, p1=0.05, c=0.0, alpha=1.0)
    sc = type(sc)(species=sc.species, horizon=10.0, delta=0.0)
    u, flag = node_control(0.5, CoordinationState(), 0.0, 300.0, [300.0], sc, 0)
    assert flag == Clamp.INTERIOR
    assert math.isclose(u, 5.0, abs_tol=1e-9)


def test_target_above_max_marginal_clamps_low():
    sc = single_species()
    u, flag = node_control(5.0, CoordinationState(), 1.0, 300.0, [300.0], sc, 0)
    assert (u, flag) == (0.0, Clamp.AT_MIN)


def test_target_below_marginal_at_max_clamps_high():
    sc = single_species()
    u, flag = node_control(-50.0, CoordinationState(), 1.0, 300.0, [300.0], sc, 0)
    assert (u, flag) == (25.0, Clamp.AT_MAX)


# advance


def test_zero_step_leaves_state():
    sc = single_species()
    s = CoordinationState(0.3, -1.2)
    assert advance(s, 1.0, 300.0, 4.0, [300.0], sc, 0, 0.0) == s


def test_flat_point_keeps_initial_state():
    # at k/2 with no harvest both integrands vanish
    sc = single_species()
    s = CoordinationState()
    for k in range(10):
        s = advance(s, 0.1 * k, 500.0, 0.0, [500.0], sc, 0, 0.1)
    assert s == CoordinationState(0.0, 0.0)


def test_exponential_factor_independent_loop():
    sc = single_species()
    grid = Grid(40, 10.0)
    path = build_path(0.6, 0, sc, np.zeros((1, grid.n_nodes)), grid)
    r, cap = 0.5, 1000.0
    expected = np.concatenate([[0.0], np.cumsum([r * (1 - 2 * x / cap) * grid.step for x in path.stocks[:-1]])])
    np.testing.assert_allclose(path.log_e, expected, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("coupling", ["own", "joint"])
def test_advance_reproduces_kernel_terms(base, base_solution, coupling):
    grid = base_solution.grid
    companions = base_solution.trajectory.stocks
    i = 0
    path = build_path(0.1, i, base, companions, grid, coupling=coupling)
    state = CoordinationState()
    for k in range(grid.n_steps):
        x = companions[:, k].copy()
        nxt = companions[:, k + 1] if coupling == "joint" else None
        state = advance(state, k * grid.step, path.stocks[k], path.harvests[k], x, base, i, grid.step, nxt)
        assert math.isclose(state.log_e, path.log_e[k + 1], rel_tol=1e-12, abs_tol=1e-14)
        assert math.isclose(state.acc, path.acc[k + 1], rel_tol=1e-10, abs_tol=1e-12)


# build_path


def test_always_clamped_path_matches_unharvested_simulation(base):
    run = simulate.integrate(base, simulate.SimSpec(10.0, 100))
    grid = run.grid
    for i in range(base.n):
        path = build_path(1e3, i, base, run.stocks, grid)
        assert np.all(path.flags == Clamp.AT_MIN)
        np.testing.assert_allclose(path.stocks, run.stocks[i], rtol=0, atol=1e-9)


def test_infeasible_path_reports_node():
    sc = single_species(h_max=1e6, x0=50.0)
    with pytest.raises(InfeasiblePathError) as info:
        build_path(-500.0, 0, sc, np.zeros((1, 101)))
    assert 1 <= info.value.node <= 100
    assert info.value.last_stock > 0
    path, status, node = trace_path(-500.0, 0, sc, np.zeros((1, 101)))
    assert node == info.value.node
    assert np.isnan(path.stocks[node:]).all()


def test_build_path_is_deterministic(base, base_solution):
    a = build_path(0.3, 1, base, base_solution.trajectory.stocks, coupling="joint")
    b = build_path(0.3, 1, base, base_solution.trajectory.stocks, coupling="joint")
    assert np.array_equal(a.stocks, b.stocks) and np.array_equal(a.harvests, b.harvests)


def test_companion_shape_checked(base):
    with pytest.raises(ValueError):
        build_path(0.0, 0, base, np.ones((3, 50)))


def test_grid_invariants():
    g = Grid(4, 2.0)
    assert g.times[0] == 0.0 and g.times[-1] == 2.0 and g.n_nodes == 5
    with pytest.raises(ValueError):
        Grid(1, 2.0)


# coordination identity and clamping


def _paths_for_identity(base, base_solution):
    grid = base_solution.grid
    companions = base_solution.trajectory.stocks
    for i, K in enumerate(base_solution.K):
        yield i, build_path(K, i, base, companions, grid, coupling="joint"), companions, "joint"
    for K in SWEEP_K:
        for i in range(base.n):
            path, status, _ = trace_path(K, i, base, companions, grid, "own")
            if status == 0:
                yield i, path, companions, "own"


def test_coordination_identity_at_interior_nodes(base, base_solution):
    grid = base_solution.grid
    worst = 0.0
    for i, path, companions, coupling in _paths_for_identity(base, base_solution):
        F = reference_coordination(path, i, base, grid, companions, coupling == "joint")
        interior = path.flags[:-1] == Clamp.INTERIOR
        if interior.any():
            worst = max(worst, float(np.max(np.abs(F[interior] - path.K))))
    assert worst <= 1e-9


def test_clamped_nodes_satisfy_optimality_inequalities(base, base_solution):
    grid = base_solution.grid
    seen = {Clamp.AT_MIN: 0, Clamp.AT_MAX: 0}
    for i, path, companions, coupling in _paths_for_identity(base, base_solution):
        F = reference_coordination(path, i, base, grid, companions, coupling == "joint")
        flags = path.flags[:-1]
        lo = flags == Clamp.AT_MIN
        hi = flags == Clamp.AT_MAX
        assert np.all(F[lo] <= path.K + 1e-9)
        assert np.all(F[hi] >= path.K - 1e-9)
        seen[Clamp.AT_MIN] += int(lo.sum())
        seen[Clamp.AT_MAX] += int(hi.sum())
    assert seen[Clamp.AT_MIN] > 0 and seen[Clamp.AT_MAX] > 0


def test_extremals_do_not_cross(base, base_solution):
    unbounded = base.with_control_bounds(h_max=1e6)
    companions = base_solution.trajectory.stocks
    paths = [build_path(K, 0, unbounded, companions) for K in SWEEP_K]
    for lower, upper in zip(paths, paths[1:]):
        assert np.all(upper.stocks[1:] >= lower.stocks[1:] - 1e-9)


def test_euler_first_order():
    sc = single_species(h_max=100.0)
    K = 0.2

    def terminal(n):
        grid = Grid(n, 10.0)
        path = build_path(K, 0, sc, np.zeros((1, grid.n_nodes)), grid)
        assert np.all(path.flags[:-1] == Clamp.INTERIOR)
        return path.terminal

    ref = terminal(2000)
    errors = [abs(terminal(n) - ref) for n in (50, 100, 200)]
    ratios = [errors[0] / errors[1], errors[1] / errors[2]]
    assert all(1.5 <= q <= 2.5 for q in ratios), ratios


# published sweep values


@pytest.mark.parametrize("K, expected", [(2.0, 580.20), (0.0, 340.57)])
def test_k_sweep_reference_points(base, base_solution, K, expected):
    unbounded = base.with_control_bounds(h_max=1e6)
    path = build_path(K, 0, unbounded, base_solution.trajectory.stocks)
    assert math.isclose(path.terminal, expected, rel_tol=0.02)
