"""Extremals of the one-species problem for a given coordination constant.

Along an optimal path the coordination function

    F_u(t) * E(t) + A(t),   E(t) = exp(int_0^t f_x),   A(t) = int_0^t F_x * E

is constant (= K) wherever the control is interior, and sits below/above K
where the control is pinned at its lower/upper bound. Here F is the
discounted profit rate and f the species' net growth rate. The extremal is
built node by node: solve for the control that makes the coordination
function equal K, clamp it into the bounds, then take one Euler step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernels
from .errors import DomainError, InfeasiblePathError, SolverError
from .scenario import Scenario, pack


class Clamp(IntEnum):
    INTERIOR = kernels.INTERIOR
    AT_MIN = kernels.AT_MIN
    AT_MAX = kernels.AT_MAX


@dataclass(frozen=True)
class Grid:
    """``n_steps + 1`` equally spaced nodes on ``[0, horizon]``."""

    n_steps: int
    horizon: float

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "Grid":
        return cls(scenario.settings.n_steps, scenario.horizon)

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_nodes) * self.step


@dataclass(frozen=True)
class CoordinationState:
    """Running terms of the coordination function; ``E`` is kept as its log."""

    log_e: float = 0.0
    acc: float = 0.0

    @property
    def e(self) -> float:
        return math.exp(self.log_e)


@dataclass
class SpeciesPath:
    """One species' extremal on the shared grid.

    ``log_e[k]`` and ``acc[k]`` are the coordination terms *entering* node
    ``k``, i.e. the values the control at node ``k`` was solved against.
    The terminal node repeats the last control; it carries no step.
    """

    stocks: np.ndarray
    harvests: np.ndarray
    flags: np.ndarray
    log_e: np.ndarray = field(default_factory=lambda: np.zeros(0))
    acc: np.ndarray = field(default_factory=lambda: np.zeros(0))
    K: float = float("nan")

    @property
    def terminal(self) -> float:
        return float(self.stocks[-1])


@dataclass
class Trajectory:
    """Stocks and harvests of every species on a shared grid, shape ``(n, N + 1)``."""

    grid: Grid
    stocks: np.ndarray
    harvests: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def copy(self) -> "Trajectory":
        return Trajectory(self.grid, self.stocks.copy(), self.harvests.copy())

    def with_path(self, i: int, path: SpeciesPath) -> "Trajectory":
        out = self.copy()
        out.stocks[i] = path.stocks
        out.harvests[i] = path.harvests
        return out


def _companion_array(companions, n, n_nodes):
    arr = companions.stocks if isinstance(companions, Trajectory) else companions
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.shape != (n, n_nodes):
        raise ValueError(f"companions must have shape {(n, n_nodes)}, got {arr.shape}")
    return arr


def _discounted_dh(scenario, i, t, x_i, u):
    econ = scenario.species[i].econ
    return math.exp(-scenario.delta * t) * kernels.profit_dh(econ.p0, econ.p1, econ.c, econ.alpha, x_i, u)


def node_control(K, state: CoordinationState, t, x_i, companions, scenario: Scenario, i, control_tol=None):
    """Control at one node and its clamp marker.

    Solves ``disc * profit_dh(u) = (K - A) / E``. ``companions`` is accepted
    for symmetry with :func:`advance`; the marginal profit does not depend
    on the other stocks.
    """
    if not x_i > 0:
        raise DomainError(f"stock must be > 0, got {x_i!r}")
    sp = scenario.species[i]
    if not sp.h_min < sp.h_max:
        raise DomainError(f"empty control interval [{sp.h_min}, {sp.h_max}]")
    tol = scenario.settings.control_tol if control_tol is None else control_tol
    econ = sp.econ
    disc = math.exp(-scenario.delta * t)
    target = (K - state.acc) / state.e
    u, flag = kernels.node_control(
        target, disc, econ.p0, econ.p1, econ.c, econ.alpha, float(x_i), sp.h_min, sp.h_max, tol
    )
    if flag == kernels.INTERIOR:
        lo = _discounted_dh(scenario, i, t, x_i, sp.h_min) - target
        hi = _discounted_dh(scenario, i, t, x_i, sp.h_max) - target
        if not (lo > 0 > hi):
            raise SolverError(f"non-monotone control residual at t={t}: {lo} .. {hi}")
    return float(u), Clamp(flag)


def advance(state: CoordinationState, t, x_i, u_i, companions, scenario: Scenario, i, d,
            companions_next=None) -> CoordinationState:
    """Left-rectangle update of the coordination terms over one step.

    ``companions`` is the full stock vector at ``t`` (entry ``i`` is
    ignored). When ``companions_next`` (the stock vector one node later) is
    given, the companions' profit sensitivity through their implied harvests
    is included in the ``F_x`` integrand; without it only species ``i``'s own
    profit enters.
    """
    if d == 0:
        return state
    params, pairs, triples = pack(scenario)
    x = np.array(companions, dtype=np.float64)
    x[i] = x_i
    p = params[i]
    fx = kernels.growth_dx(int(p[kernels.KIND]), p[kernels.R], p[kernels.CAP], p[kernels.GAMMA], float(x_i))
    fx -= kernels.interaction_dxi(i, x, pairs, triples)
    econ = scenario.species[i].econ
    fprofit_x = kernels.profit_dx(econ.p0, econ.p1, econ.c, econ.alpha, float(x_i), float(u_i))
    if companions_next is not None:
        cols = np.column_stack([x, np.asarray(companions_next, dtype=np.float64)])
        fprofit_x -= kernels.coupled_costate_term(i, 0, x, cols, d, params, pairs, triples)
    e = state.e
    log_e = state.log_e + fx * d
    if log_e > kernels._LOG_MAX:
        raise SolverError(f"coordination factor overflow at t={t + d}")
    acc = state.acc + math.exp(-scenario.delta * t) * fprofit_x * e * d
    return CoordinationState(log_e, acc)


def trace_path(K, i, scenario: Scenario, companions, grid: Grid | None = None,
               coupling="own", control_tol=None):
    """Like :func:`build_path` but never raises on a failed integration.

    Returns ``(path, status, node)`` with the kernel status code; on failure
    the stocks from ``node`` on are NaN.
    """
    grid = grid or Grid.for_scenario(scenario)
    if coupling not in ("own", "joint"):
        raise ValueError(f"coupling must be 'own' or 'joint', got {coupling!r}")
    x0 = scenario.species[i].x0
    if not x0 > 0:
        raise DomainError(f"initial stock must be > 0, got {x0!r}")
    X = _companion_array(companions, scenario.n, grid.n_nodes)
    params, pairs, triples = pack(scenario)
    tol = scenario.settings.control_tol if control_tol is None else control_tol
    stocks, harvests, flags, log_e, acc, status, node = kernels.build_path(
        float(K), i, float(x0), X, grid.step, scenario.delta, params, pairs, triples,
        coupling == "joint", tol,
    )
    if status != kernels.OK:
        for arr in (stocks, harvests, log_e, acc):
            arr[node:] = np.nan
    return SpeciesPath(stocks, harvests, flags, log_e, acc, float(K)), int(status), int(node)


def build_path(K, i, scenario: Scenario, companions, grid: Grid | None = None,
               coupling="own", control_tol=None) -> SpeciesPath:
    """Extremal ``x_i^K`` of species ``i`` with the other stocks frozen.

    ``companions`` holds every species' stock at every node (row ``i`` is
    ignored). ``coupling="joint"`` adds the companions' revenue sensitivity
    to the co-state integrand (see :func:`advance`).

    Raises :class:`InfeasiblePathError` if the stock reaches zero.
    """
    path, status, node = trace_path(K, i, scenario, companions, grid, coupling, control_tol)
    if status == kernels.STOCK_NONPOSITIVE:
        raise InfeasiblePathError(
            f"species {i}: stock left the positive region at node {node} (K={K})",
            node=node, last_stock=float(path.stocks[node - 1]), species=i,
        )
    if status == kernels.COSTATE_OVERFLOW:
        raise SolverError(f"species {i}: coordination factor overflow at node {node} (K={K})")
    return path


def coordination_values(path: SpeciesPath, i, scenario: Scenario, grid: Grid) -> np.ndarray:
    """Coordination function at nodes ``0 .. N-1`` rebuilt from the stored terms."""
    times = grid.times[:-1]
    dh = np.array([
        _discounted_dh(scenario, i, t, x, u)
        for t, x, u in zip(times, path.stocks[:-1], path.harvests[:-1])
    ])
    return dh * np.exp(path.log_e[:-1]) + path.acc[:-1]
