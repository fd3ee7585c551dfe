"""Forward Euler runs of the coupled system under a fixed harvest schedule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import InfeasiblePathError
from .scenario import Scenario, pack
from .trajectory import Grid, Trajectory

STEPS_PER_YEAR = 10


def default_steps(horizon: float) -> int:
    """Grid size used when none is given: ten steps per year, at least two."""
    return max(2, int(round(STEPS_PER_YEAR * horizon)))


@dataclass(frozen=True)
class SimSpec:
    """What to integrate.

    ``harvests`` may be ``None`` (no fishing), a scalar applied to every
    species, a length-``n`` vector of per-species constants, or an
    ``(n, n_steps + 1)`` per-node schedule. ``x0`` defaults to the
    scenario's initial stocks.
    """

    horizon: float
    n_steps: int | None = None
    harvests: object = None
    x0: object = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")

    def grid(self) -> Grid:
        return Grid(self.n_steps if self.n_steps is not None else default_steps(self.horizon), self.horizon)


class SteadyState(NamedTuple):
    stocks: np.ndarray
    converged: bool
    years: float


def harvest_schedule(spec: SimSpec, n: int, grid: Grid) -> np.ndarray:
    """Expand ``spec.harvests`` to an ``(n, N + 1)`` array."""
    h = spec.harvests
    if h is None:
        out = np.zeros((n, grid.n_nodes))
    else:
        arr = np.asarray(h, dtype=np.float64)
        if arr.ndim == 0:
            out = np.full((n, grid.n_nodes), float(arr))
        elif arr.shape == (n,):
            out = np.repeat(arr[:, None], grid.n_nodes, axis=1)
        elif arr.shape == (n, grid.n_nodes):
            out = arr.copy()
        else:
            raise ValueError(
                f"harvests must be a scalar, shape ({n},) or ({n}, {grid.n_nodes}); got {arr.shape}"
            )
    if not np.all(np.isfinite(out)) or np.any(out < 0):
        raise ValueError("harvests must be finite and >= 0")
    return out


def _initial(scenario: Scenario, x0) -> np.ndarray:
    x = scenario.x0 if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (scenario.n,):
        raise ValueError(f"x0 must have shape ({scenario.n},), got {x.shape}")
    if not np.all(x > 0):
        raise ValueError("initial stocks must be > 0")
    return x


def integrate(scenario: Scenario, spec: SimSpec) -> Trajectory:
    """Simultaneous Euler step for every species under the given harvests.

    Raises :class:`InfeasiblePathError` at the first node where a stock is
    no longer positive.
    """
    grid = spec.grid()
    x0 = _initial(scenario, spec.x0)
    harvests = harvest_schedule(spec, scenario.n, grid)
    params, pairs, triples = pack(scenario)
    stocks, node = kernels.integrate(x0, harvests, grid.step, params, pairs, triples)
    if node >= 0:
        bad = int(np.argmin(stocks[:, node - 1]))
        raise InfeasiblePathError(
            f"stock left the positive region at node {node} (t={node * grid.step:g})",
            node=node, last_stock=float(stocks[bad, node - 1]), species=bad,
        )
    return Trajectory(grid, stocks, harvests)


def steady_state(scenario: Scenario, x0=None, tol: float = 1e-6, max_horizon: float = 500.0,
                 step: float = 1.0 / STEPS_PER_YEAR) -> SteadyState:
    """Run unharvested until every stock changes slower than ``tol`` per year.

    ``converged`` is False if ``max_horizon`` is reached first, or if a
    stock collapses to zero (then ``stocks`` is the last positive state).
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if not step > 0:
        raise ValueError(f"step must be > 0, got {step}")
    x = _initial(scenario, x0)
    params, pairs, triples = pack(scenario)
    max_steps = int(round(max_horizon / step))
    stocks, steps, converged, _ = kernels.run_to_rest(x, step, tol, max_steps, params, pairs, triples)
    return SteadyState(stocks, bool(converged), steps * step)
