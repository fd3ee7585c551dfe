"""Biological and economic model of an n-species fishery.

Units throughout: stocks in 10^6 kg, harvests in 10^6 kg/year, prices in
EUR/kg, costs and revenue in 10^6 EUR, time in years.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DomainError

GROWTH_KINDS = {
    "logistic": kernels.LOGISTIC,
    "modified-logistic": kernels.MODIFIED_LOGISTIC,
    "gompertz": kernels.GOMPERTZ,
}


@dataclass(frozen=True)
class GrowthModel:
    """Natural growth law of one species.

    ``gamma`` is only read by the modified logistic law.
    """

    kind: str = "logistic"
    r: float = 0.5
    k: float = 1000.0
    gamma: float = 1.0

    @property
    def code(self) -> int:
        return GROWTH_KINDS[self.kind]

    @property
    def msy_stock(self) -> float:
        """Stock of maximum logistic growth, ``k / 2``."""
        return self.k / 2.0


@dataclass(frozen=True)
class PairTerm:
    j: int
    c: float
    beta: float = 1.0
    gamma: float = 1.0


@dataclass(frozen=True)
class TripleTerm:
    j: int
    k: int
    c: float
    beta: float = 1.0
    gamma_j: float = 1.0
    gamma_k: float = 1.0


@dataclass(frozen=True)
class InteractionRow:
    """Sparse coupling row of one species; indices are 0-based."""

    pair_terms: tuple[PairTerm, ...] = ()
    triple_terms: tuple[TripleTerm, ...] = ()

    def is_empty(self) -> bool:
        return not self.pair_terms and not self.triple_terms


@dataclass(frozen=True)
class Economics:
    """Linear inverse demand ``p0 - p1*h`` and stock-dependent cost ``c*h**alpha/x``."""

    p0: float
    p1: float
    c: float
    alpha: float = 1.0


@dataclass
class StatePoint:
    t: float
    stocks: np.ndarray
    harvests: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _check_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"{name}: non-finite input {v!r}")


def _check_stock(x, allow_zero=False):
    if x < 0 or (x == 0 and not allow_zero):
        raise DomainError(f"stock must be {'>= 0' if allow_zero else '> 0'}, got {x!r}")


def growth(model: GrowthModel, x: float) -> float:
    """Natural growth rate at stock ``x``."""
    _check_finite("growth", x)
    _check_stock(x, allow_zero=model.kind != "gompertz")
    return kernels.growth(model.code, model.r, model.k, model.gamma, float(x))


def growth_dx(model: GrowthModel, x: float) -> float:
    _check_finite("growth_dx", x)
    _check_stock(x, allow_zero=model.kind == "logistic")
    return kernels.growth_dx(model.code, model.r, model.k, model.gamma, float(x))


def pack_row(row: InteractionRow, i: int) -> tuple[np.ndarray, np.ndarray]:
    pairs = np.array(
        [[i, t.j, t.c, t.beta, t.gamma] for t in row.pair_terms], dtype=np.float64
    ).reshape(-1, 5)
    triples = np.array(
        [[i, t.j, t.k, t.c, t.beta, t.gamma_j, t.gamma_k] for t in row.triple_terms],
        dtype=np.float64,
    ).reshape(-1, 7)
    return pairs, triples


def _referenced(row: InteractionRow, i: int) -> set[int]:
    idx = {i}
    for t in row.pair_terms:
        if t.c != 0.0:
            idx.add(t.j)
    for t in row.triple_terms:
        if t.c != 0.0:
            idx.update((t.j, t.k))
    return idx


def _stocks_for_row(row, i, stocks):
    x = np.asarray(stocks, dtype=np.float64)
    for idx in _referenced(row, i):
        if not math.isfinite(x[idx]):
            raise DomainError(f"interaction: non-finite stock at index {idx}")
        if x[idx] <= 0.0:
            raise DomainError(f"interaction: stock {idx} must be > 0, got {x[idx]!r}")
    return x


def interaction(row: InteractionRow, i: int, stocks: Sequence[float]) -> float:
    """Coupling term ``g_i`` at the given stock vector."""
    if row.is_empty():
        return 0.0
    x = _stocks_for_row(row, i, stocks)
    pairs, triples = pack_row(row, i)
    return kernels.interaction(i, x, pairs, triples)


def interaction_dxi(row: InteractionRow, i: int, stocks: Sequence[float]) -> float:
    if row.is_empty():
        return 0.0
    x = _stocks_for_row(row, i, stocks)
    pairs, triples = pack_row(row, i)
    return kernels.interaction_dxi(i, x, pairs, triples)


def interaction_dxj(row: InteractionRow, i: int, j: int, stocks: Sequence[float]) -> float:
    """Partial of ``g_i`` with respect to another species' stock ``x_j``."""
    if j == i:
        raise ValueError("use interaction_dxi for the own-stock partial")
    if row.is_empty():
        return 0.0
    x = _stocks_for_row(row, i, stocks)
    pairs, triples = pack_row(row, i)
    return kernels.interaction_cross(i, j, x, pairs, triples)


def _check_profit_args(x, h):
    _check_finite("profit", x, h)
    if x <= 0:
        raise DomainError(f"profit: stock must be > 0, got {x!r}")
    if h < 0:
        raise DomainError(f"profit: harvest must be >= 0, got {h!r}")


def profit(econ: Economics, x: float, h: float) -> float:
    """Instantaneous net revenue ``p0*h - p1*h**2 - c*h**alpha/x``."""
    _check_profit_args(x, h)
    return kernels.profit(econ.p0, econ.p1, econ.c, econ.alpha, float(x), float(h))


def profit_dh(econ: Economics, x: float, h: float) -> float:
    _check_profit_args(x, h)
    return kernels.profit_dh(econ.p0, econ.p1, econ.c, econ.alpha, float(x), float(h))


def profit_dx(econ: Economics, x: float, h: float) -> float:
    _check_profit_args(x, h)
    return kernels.profit_dx(econ.p0, econ.p1, econ.c, econ.alpha, float(x), float(h))


def dynamics(i: int, scenario, stocks: Sequence[float], h_i: float) -> float:
    """Rate of change of species ``i``: growth minus coupling minus harvest."""
    sp = scenario.species[i]
    x = np.asarray(stocks, dtype=np.float64)
    _check_finite("dynamics", h_i)
    return growth(sp.growth, x[i]) - interaction(sp.interactions, i, x) - h_i


def implied_harvest(i: int, scenario, stocks: Sequence[float], xdot_i: float) -> float:
    """Harvest that produces the rate ``xdot_i`` for species ``i``."""
    sp = scenario.species[i]
    x = np.asarray(stocks, dtype=np.float64)
    _check_finite("implied_harvest", xdot_i)
    return growth(sp.growth, x[i]) - interaction(sp.interactions, i, x) - xdot_i
