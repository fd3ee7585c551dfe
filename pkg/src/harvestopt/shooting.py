"""Shooting on the coordination constant.

The shooting function maps K to the terminal stock of the extremal built
with it; the target K is a root of ``phi(K) - x_T``. Roots are found with
the secant method from the two bracket ends, falling back to a bisection
step whenever the secant denominator collapses (the zero-harvest plateau)
or the secant step would leave the current sign-change bracket.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfeasiblePathError, InfeasibleTargetError, NonConvergenceError
from .scenario import Scenario, ShootingSettings
from .trajectory import Grid, SpeciesPath, build_path, coordination_values, trace_path

WORKERS_ENV = "HARVESTOPT_WORKERS"


@dataclass
class ShootingResult:
    K: float
    path: SpeciesPath
    residual: float
    iterations: int
    plateau: bool = False


@dataclass
class SweepPoint:
    K: float
    terminal: float
    feasible: bool
    path: SpeciesPath
    failed_node: int = -1


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _on_plateau(path: SpeciesPath) -> bool:
    flags = path.flags[:-1]
    return bool(np.all(flags == kernels.AT_MIN) or np.all(flags == kernels.AT_MAX))


class _Phi:
    """Memoized shooting function; an infeasible extremal counts as terminal stock 0."""

    def __init__(self, i, scenario, companions, grid, coupling):
        self.args = (i, scenario, companions, grid, coupling)
        self.target = scenario.species[i].xT
        self.cache = {}
        self.calls = 0

    def path(self, K):
        if K not in self.cache:
            self.calls += 1
            try:
                path = build_path(K, *self.args)
                self.cache[K] = (path.terminal, path)
            except InfeasiblePathError:
                self.cache[K] = (0.0, None)
        return self.cache[K]

    def __call__(self, K):
        return self.path(K)[0] - self.target


def shoot(i, scenario: Scenario, companions, grid: Grid | None = None,
          settings: ShootingSettings | None = None, coupling="own",
          bracket=None, guess=None, fallback_tol=None) -> ShootingResult:
    """Coordination constant whose extremal ends within ``tol_terminal`` of ``x_T``.

    ``bracket`` overrides the settings' ``(k_min, k_max)``; ``guess`` is
    tried before anything else and returned as-is if it already hits the
    target. If the target is outside the endpoint values the bracket is
    doubled in width once before giving up.

    On the lower-bound plateau (every node at ``h_min``) the smallest K
    producing the same path is returned, with ``plateau`` set.

    ``fallback_tol`` (>= ``tol_terminal``) accepts the best evaluated K when
    the iteration stalls short of ``tol_terminal``, or when the target lies
    just outside the reachable range; near a cusp of phi the tight
    tolerance may be unreachable in floating point.
    """
    grid = grid or Grid.for_scenario(scenario)
    settings = settings or scenario.settings.shooting
    tol = settings.tol_terminal
    phi = _Phi(i, scenario, companions, grid, coupling)

    def done(K):
        value, path = phi.path(K)
        plateau = _on_plateau(path)
        if plateau and path.flags[0] == kernels.AT_MIN:
            # every K above the largest coordination value gives this path
            K_low = float(np.max(coordination_values(path, i, scenario, grid)))
            if K_low < K:
                v_low, p_low = phi.path(K_low)
                if p_low is not None and abs(v_low - phi.target) <= abs(value - phi.target) + tol:
                    K, value, path = K_low, v_low, p_low
        return ShootingResult(float(K), path, abs(value - phi.target), phi.calls, plateau)

    def fallback():
        if fallback_tol is None:
            return None
        feasible = [(abs(v - phi.target), K) for K, (v, p) in phi.cache.items() if p is not None]
        if feasible:
            resid, K_best = min(feasible)
            if resid <= fallback_tol:
                return done(K_best)
        return None

    if guess is not None and abs(phi(guess)) <= tol and phi.path(guess)[1] is not None:
        return done(guess)

    a, b = bracket if bracket is not None else (settings.k_min, settings.k_max)
    for attempt in range(2):
        fa = phi(a)
        if abs(fa) <= tol:
            return done(a)
        fb = phi(b)
        if abs(fb) <= tol:
            return done(b)
        if fa * fb < 0:
            break
        if attempt == 0:
            mid, width = 0.5 * (a + b), b - a
            a, b = mid - width, mid + width
    else:
        # a target on the edge of the reachable range may still be within fallback_tol
        result = fallback()
        if result is not None:
            return result
        values = [v for v, _ in phi.cache.values()]
        reachable = (min(values), max(values))
        raise InfeasibleTargetError(
            f"species {i}: target {phi.target} outside reachable interval "
            f"[{reachable[0]:.6g}, {reachable[1]:.6g}] for K in [{a}, {b}]",
            reachable=reachable, species=i,
        )

    lo, f_lo, hi = a, fa, b
    prev, f_prev, cur, f_cur = a, fa, b, fb
    best = min(abs(fa), abs(fb))
    for _ in range(settings.max_iters):
        den = f_cur - f_prev
        nxt = None
        if abs(den) >= settings.secant_guard:
            nxt = cur - f_cur * (cur - prev) / den
            if not min(lo, hi) < nxt < max(lo, hi) or nxt in phi.cache:
                nxt = None
        if nxt is None:
            nxt = 0.5 * (lo + hi)
            if nxt in phi.cache:
                # bracket is down to adjacent floats; phi cannot resolve tol here
                break
        f_nxt = phi(nxt)
        best = min(best, abs(f_nxt))
        if abs(f_nxt) <= tol and phi.path(nxt)[1] is not None:
            return done(nxt)
        if (f_nxt < 0) == (f_lo < 0):
            lo, f_lo = nxt, f_nxt
        else:
            hi = nxt
        prev, f_prev, cur, f_cur = cur, f_cur, nxt, f_nxt
    result = fallback()
    if result is not None:
        return result
    raise NonConvergenceError(
        f"species {i}: shooting did not converge in {phi.calls} evaluations "
        f"(best residual {best:.3g})",
        best_residual=best, species=i,
    )


def sweep_K(i, scenario: Scenario, companions, grid: Grid | None, k_values,
            coupling="own", workers=None) -> list[SweepPoint]:
    """Shooting function at each K, in input order.

    An extremal that reaches zero stock is reported with its last positive
    stock and ``feasible=False``.
    """
    k_values = [float(K) for K in k_values]
    if not k_values:
        raise ValueError("k_values must be non-empty")
    grid = grid or Grid.for_scenario(scenario)

    def one(K):
        path, status, node = trace_path(K, i, scenario, companions, grid, coupling)
        if status == kernels.OK:
            return SweepPoint(K, path.terminal, True, path)
        return SweepPoint(K, float(path.stocks[node - 1]), False, path, node)

    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(k_values) == 1:
        return [one(K) for K in k_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, k_values))
