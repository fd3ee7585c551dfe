"""Cyclic coordinate ascent over species.

Each pass replaces species 1..n in turn by the solution of its one-species
problem with the other stock paths frozen, and stops once no species'
coordination constant moves by more than ``tol_k_change`` over a pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InfeasiblePathError, InfeasibleTargetError, NonConvergenceError, SolverError
from .scenario import CcdSettings, Scenario, SolverSettings, pack
from .shooting import ShootingResult, shoot
from .trajectory import Grid, SpeciesPath, Trajectory

log = logging.getLogger(__name__)


@dataclass
class IterationRecord:
    """One outer pass.

    ``violation`` is how far the pass's implied harvests stray outside the
    control bounds; the objective is scored with them clipped, so it is
    only an exact objective value when ``violation`` is zero.
    """

    iteration: int
    K: np.ndarray
    objective: float
    violation: float = 0.0


@dataclass
class Solution:
    trajectory: Trajectory
    paths: list[SpeciesPath]
    K: np.ndarray
    revenue: float
    outer_iters: int
    history: list[IterationRecord] = field(default_factory=list)
    plateau: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def grid(self) -> Grid:
        return self.trajectory.grid

    def residuals(self, scenario: Scenario) -> np.ndarray:
        return np.abs(self.trajectory.stocks[:, -1] - scenario.xT)


def objective(trajectory: Trajectory, scenario: Scenario, grid: Grid | None = None) -> float:
    """Discounted revenue, left-rectangle rule over nodes ``0 .. N-1``."""
    grid = grid or trajectory.grid
    params, _, _ = pack(scenario)
    return float(kernels.objective(
        np.ascontiguousarray(trajectory.stocks), np.ascontiguousarray(trajectory.harvests),
        grid.step, scenario.delta, params,
    ))


def implied_harvests(stocks: np.ndarray, scenario: Scenario, grid: Grid) -> np.ndarray:
    """Harvest schedule that reproduces ``stocks`` under the Euler step.

    The terminal node repeats the previous value.
    """
    params, pairs, triples = pack(scenario)
    n, n_nodes = stocks.shape
    out = np.empty_like(stocks)
    d = grid.step
    for k in range(n_nodes - 1):
        x = np.ascontiguousarray(stocks[:, k])
        for i in range(n):
            out[i, k] = kernels.species_rate(i, x, 0.0, params, pairs, triples) - (stocks[i, k + 1] - x[i]) / d
    out[:, -1] = out[:, -2]
    return out


def initial_guess(scenario: Scenario, grid: Grid) -> Trajectory:
    """Straight-line stock paths between the boundary stocks.

    Harvests are the implied ones clipped into the control bounds, so the
    pair is not necessarily consistent; only the stocks seed the first pass.
    """
    frac = np.linspace(0.0, 1.0, grid.n_nodes)
    stocks = scenario.x0[:, None] + (scenario.xT - scenario.x0)[:, None] * frac[None, :]
    lo, hi = _bounds(scenario)
    return Trajectory(grid, stocks, np.clip(implied_harvests(stocks, scenario, grid), lo, hi))


def maximize_species(i, current: Trajectory, scenario: Scenario, grid: Grid | None = None,
                     settings: SolverSettings | None = None, K_prev=None, fallback_tol=None):
    """Replace species ``i`` by its optimal path given the other stocks in ``current``.

    With ``K_prev`` the previous constant is tried first and then a bracket
    of half-width ``warm_halfwidth`` around it; the configured bracket is
    the fallback. Returns ``(trajectory, ShootingResult)``.
    """
    grid = grid or current.grid
    settings = settings or scenario.settings
    ccd = settings.ccd
    companions = current.stocks
    result: ShootingResult | None = None
    try:
        if K_prev is not None:
            try:
                hw = ccd.warm_halfwidth
                result = shoot(i, scenario, companions, grid, settings.shooting, ccd.coupling,
                               bracket=(K_prev - hw, K_prev + hw), guess=K_prev,
                               fallback_tol=fallback_tol)
            except InfeasibleTargetError:
                log.debug("species %d: warm bracket around %g failed, using default", i, K_prev)
        if result is None:
            result = shoot(i, scenario, companions, grid, settings.shooting, ccd.coupling,
                           fallback_tol=fallback_tol)
    except SolverError as exc:
        if getattr(exc, "species", None) is None:
            exc.species = i
        exc.args = (f"[species {i}] {exc.args[0]}",) + exc.args[1:]
        raise
    return current.with_path(i, result.path), result


def _bounds(scenario: Scenario):
    lo = np.array([s.h_min for s in scenario.species])[:, None]
    hi = np.array([s.h_max for s in scenario.species])[:, None]
    return lo, hi


def path_objective(stocks: np.ndarray, scenario: Scenario, grid: Grid) -> tuple[float, float]:
    """Objective of a stock-path vector and its control-bound violation.

    The implied harvests are clipped into bounds before scoring.
    """
    lo, hi = _bounds(scenario)
    raw = implied_harvests(stocks, scenario, grid)
    steps = raw[:, :-1]
    violation = float(max(np.max(lo - steps), np.max(steps - hi), 0.0))
    clipped = Trajectory(grid, stocks, np.clip(raw, lo, hi))
    return objective(clipped, scenario, grid), violation


def closed_loop(controls: np.ndarray, scenario: Scenario, grid: Grid) -> Trajectory:
    """Simultaneous re-integration of a harvest schedule from ``x0``."""
    params, pairs, triples = pack(scenario)
    stocks, node = kernels.integrate(
        scenario.x0, np.ascontiguousarray(controls, dtype=np.float64), grid.step, params, pairs, triples
    )
    if node >= 0:
        bad = int(np.argmin(stocks[:, node - 1]))
        raise InfeasiblePathError(
            f"re-integrated controls leave the positive region at node {node}",
            node=node, last_stock=float(stocks[bad, node - 1]), species=bad,
        )
    return Trajectory(grid, stocks, np.array(controls, dtype=np.float64))


def solve(scenario: Scenario, grid: Grid | None = None, settings: SolverSettings | None = None,
          initial: Trajectory | None = None) -> Solution:
    """Iterate full passes over species ``1..n`` until the K vector settles.

    Inner shoots aim at ``min(tol_terminal, shooting_tol)`` so that the
    frozen companion paths are nearly exact extremals, and settle for
    ``tol_terminal`` where the tighter target is unreachable. The returned
    trajectory is the simultaneous re-integration of the final controls, so
    stocks and harvests are mutually consistent; ``paths`` keeps the
    per-species extremals of the last pass.
    """
    grid = grid or Grid.for_scenario(scenario)
    settings = settings or scenario.settings
    ccd: CcdSettings = settings.ccd
    inner = replace(settings, shooting=replace(
        settings.shooting, tol_terminal=min(settings.shooting.tol_terminal, ccd.shooting_tol)))
    current = initial.copy() if initial is not None else initial_guess(scenario, grid)
    n = scenario.n
    K = None
    paths: list[SpeciesPath | None] = [None] * n
    plateau = np.zeros(n, dtype=bool)
    history: list[IterationRecord] = []

    for it in range(1, ccd.max_outer_iters + 1):
        K_new = np.empty(n)
        for i in range(n):
            current, res = maximize_species(i, current, scenario, grid, inner,
                                            None if K is None else K[i],
                                            fallback_tol=settings.shooting.tol_terminal)
            K_new[i] = res.K
            paths[i] = res.path
            plateau[i] = res.plateau
        obj, violation = path_objective(current.stocks, scenario, grid)
        history.append(IterationRecord(it, K_new.copy(), obj, violation))
        log.info("pass %d: K=%s objective=%.6f", it, np.array2string(K_new, precision=7), obj)
        if K is not None and np.max(np.abs(K_new - K)) < ccd.tol_k_change:
            final = closed_loop(current.harvests, scenario, grid)
            revenue = objective(final, scenario, grid)
            return Solution(final, list(paths), K_new, revenue, it, history, plateau.copy())
        K = K_new

    change = np.max(np.abs(history[-1].K - history[-2].K)) if len(history) > 1 else float("nan")
    raise NonConvergenceError(
        f"coordinate ascent did not settle in {ccd.max_outer_iters} passes (last K change {change:.3g})",
        history=history,
    )
