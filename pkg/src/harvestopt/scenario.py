"""Scenario data model, JSON ingestion and validation.

A scenario file is a single JSON document; see README.md for the schema.
Interaction terms reference other species by name and are listed sparsely.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Any

import numpy as np

from . import kernels
from .errors import ScenarioError
from .model import GROWTH_KINDS, Economics, GrowthModel, InteractionRow, PairTerm, TripleTerm

COUPLINGS = ("joint", "own")


@dataclass(frozen=True)
class ShootingSettings:
    k_min: float = -2.0
    k_max: float = 2.0
    tol_terminal: float = 5e-2
    max_iters: int = 100
    secant_guard: float = 1e-12


@dataclass(frozen=True)
class CcdSettings:
    tol_k_change: float = 1e-6
    max_outer_iters: int = 20
    warm_halfwidth: float = 0.5
    coupling: str = "joint"
    shooting_tol: float = 1e-9


@dataclass(frozen=True)
class SolverSettings:
    n_steps: int = 100
    control_tol: float = 1e-10
    shooting: ShootingSettings = field(default_factory=ShootingSettings)
    ccd: CcdSettings = field(default_factory=CcdSettings)


@dataclass(frozen=True)
class Species:
    name: str
    growth: GrowthModel
    econ: Economics
    interactions: InteractionRow
    x0: float
    xT: float
    h_min: float
    h_max: float


@dataclass(frozen=True)
class Scenario:
    species: tuple[Species, ...]
    horizon: float = 10.0
    delta: float = 0.05
    settings: SolverSettings = field(default_factory=SolverSettings)
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.species)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.species]

    @property
    def x0(self) -> np.ndarray:
        return np.array([s.x0 for s in self.species], dtype=np.float64)

    @property
    def xT(self) -> np.ndarray:
        return np.array([s.xT for s in self.species], dtype=np.float64)

    def index(self, key) -> int:
        """Species index from a 0-based int, a 1-based numeric string or a name."""
        if isinstance(key, int):
            if not 0 <= key < self.n:
                raise IndexError(f"species index {key} out of range")
            return key
        if key in self.names:
            return self.names.index(key)
        if str(key).isdigit() and 1 <= int(key) <= self.n:
            return int(key) - 1
        raise KeyError(f"unknown species {key!r}")

    def with_horizon(self, horizon: float, n_steps: int | None = None) -> "Scenario":
        settings = self.settings if n_steps is None else replace(self.settings, n_steps=n_steps)
        return replace(self, horizon=float(horizon), settings=settings)

    def with_species(self, i: int, **changes) -> "Scenario":
        species = list(self.species)
        species[i] = replace(species[i], **changes)
        return replace(self, species=tuple(species))

    def with_control_bounds(self, h_min=None, h_max=None) -> "Scenario":
        species = tuple(
            replace(
                s,
                h_min=s.h_min if h_min is None else float(h_min),
                h_max=s.h_max if h_max is None else float(h_max),
            )
            for s in self.species
        )
        return replace(self, species=species)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


# packing


def pack(scenario: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten the scenario into the kernel tables ``(params, pairs, triples)``."""
    params = np.zeros((scenario.n, kernels.N_PARAMS))
    pairs = []
    triples = []
    for i, sp in enumerate(scenario.species):
        row = params[i]
        row[kernels.KIND] = sp.growth.code
        row[kernels.R] = sp.growth.r
        row[kernels.CAP] = sp.growth.k
        row[kernels.GAMMA] = sp.growth.gamma
        row[kernels.P0] = sp.econ.p0
        row[kernels.P1] = sp.econ.p1
        row[kernels.COST] = sp.econ.c
        row[kernels.ALPHA] = sp.econ.alpha
        row[kernels.HMIN] = sp.h_min
        row[kernels.HMAX] = sp.h_max
        for t in sp.interactions.pair_terms:
            pairs.append([i, t.j, t.c, t.beta, t.gamma])
        for t in sp.interactions.triple_terms:
            triples.append([i, t.j, t.k, t.c, t.beta, t.gamma_j, t.gamma_k])
    return (
        params,
        np.array(pairs, dtype=np.float64).reshape(-1, 5),
        np.array(triples, dtype=np.float64).reshape(-1, 7),
    )


def permute(scenario: Scenario, order) -> Scenario:
    """Relabel species so that new species ``m`` is old species ``order[m]``."""
    order = list(order)
    if sorted(order) != list(range(scenario.n)):
        raise ValueError(f"not a permutation of 0..{scenario.n - 1}: {order}")
    new_of_old = {old: new for new, old in enumerate(order)}
    species = []
    for old in order:
        sp = scenario.species[old]
        pairs = tuple(replace(t, j=new_of_old[t.j]) for t in sp.interactions.pair_terms)
        triples = []
        for t in sp.interactions.triple_terms:
            j, k = new_of_old[t.j], new_of_old[t.k]
            if j < k:
                triples.append(replace(t, j=j, k=k))
            else:
                triples.append(replace(t, j=k, k=j, gamma_j=t.gamma_k, gamma_k=t.gamma_j))
        species.append(replace(sp, interactions=InteractionRow(pairs, tuple(triples))))
    return replace(scenario, species=tuple(species))


# JSON


_TOP_KEYS = {"name", "horizon", "discount", "species", "solver"}
_SPECIES_KEYS = {"name", "growth", "economics", "interactions", "x0", "xT", "h_min", "h_max"}
_GROWTH_KEYS = {"kind", "r", "k", "gamma"}
_ECON_KEYS = {"p0", "p1", "c", "alpha"}
_INTERACTION_KEYS = {"pairs", "triples"}
_PAIR_KEYS = {"species", "c", "beta", "gamma"}
_TRIPLE_KEYS = {"species", "c", "beta", "gamma_j", "gamma_k"}
_SOLVER_KEYS = {"n_steps", "control_tol", "shooting", "ccd"}
_SHOOTING_KEYS = {f for f in ShootingSettings.__dataclass_fields__}
_CCD_KEYS = {f for f in CcdSettings.__dataclass_fields__}


class _Reader:
    """Strict accessor over one JSON object; errors carry the object's location."""

    def __init__(self, obj, where, allowed):
        if not isinstance(obj, dict):
            raise ScenarioError(f"expected an object, got {type(obj).__name__}", where)
        unknown = sorted(set(obj) - allowed)
        if unknown:
            raise ScenarioError(f"unknown field(s) {', '.join(unknown)}", where)
        self.obj = obj
        self.where = where

    def loc(self, key):
        return f"{self.where}.{key}" if self.where else key

    def has(self, key):
        return key in self.obj

    def raw(self, key, default=...):
        if key not in self.obj:
            if default is ...:
                raise ScenarioError("missing required field", self.loc(key))
            return default
        return self.obj[key]

    def number(self, key, default=...):
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"expected a number, got {v!r}", self.loc(key))
        return float(v)

    def integer(self, key, default=...):
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            if isinstance(v, float) and v.is_integer():
                return int(v)
            raise ScenarioError(f"expected an integer, got {v!r}", self.loc(key))
        return v

    def string(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, str):
            raise ScenarioError(f"expected a string, got {v!r}", self.loc(key))
        return v

    def array(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, list):
            raise ScenarioError(f"expected an array, got {v!r}", self.loc(key))
        return v


def _parse_settings(obj) -> SolverSettings:
    if obj is None:
        return SolverSettings()
    rd = _Reader(obj, "solver", _SOLVER_KEYS)
    d = SolverSettings()
    shooting = d.shooting
    if rd.has("shooting"):
        sh = _Reader(rd.raw("shooting"), "solver.shooting", _SHOOTING_KEYS)
        shooting = ShootingSettings(
            k_min=sh.number("k_min", d.shooting.k_min),
            k_max=sh.number("k_max", d.shooting.k_max),
            tol_terminal=sh.number("tol_terminal", d.shooting.tol_terminal),
            max_iters=sh.integer("max_iters", d.shooting.max_iters),
            secant_guard=sh.number("secant_guard", d.shooting.secant_guard),
        )
    ccd = d.ccd
    if rd.has("ccd"):
        cc = _Reader(rd.raw("ccd"), "solver.ccd", _CCD_KEYS)
        coupling = cc.string("coupling", d.ccd.coupling)
        if coupling not in COUPLINGS:
            raise ScenarioError(f"coupling must be one of {COUPLINGS}", cc.loc("coupling"))
        ccd = CcdSettings(
            tol_k_change=cc.number("tol_k_change", d.ccd.tol_k_change),
            max_outer_iters=cc.integer("max_outer_iters", d.ccd.max_outer_iters),
            warm_halfwidth=cc.number("warm_halfwidth", d.ccd.warm_halfwidth),
            coupling=coupling,
            shooting_tol=cc.number("shooting_tol", d.ccd.shooting_tol),
        )
    return SolverSettings(
        n_steps=rd.integer("n_steps", d.n_steps),
        control_tol=rd.number("control_tol", d.control_tol),
        shooting=shooting,
        ccd=ccd,
    )


def from_dict(doc: dict[str, Any]) -> Scenario:
    top = _Reader(doc, "", _TOP_KEYS)
    raw_species = top.array("species")
    if not raw_species:
        raise ScenarioError("at least one species is required", "species")

    names = []
    for s, obj in enumerate(raw_species):
        where = f"species[{s}]"
        name = _Reader(obj, where, _SPECIES_KEYS).string("name", f"species{s + 1}")
        if name in names:
            raise ScenarioError(f"duplicate species name {name!r}", where + ".name")
        names.append(name)

    def resolve(ref, where):
        if not isinstance(ref, str) or ref not in names:
            raise ScenarioError(f"unknown species reference {ref!r}", where)
        return names.index(ref)

    species = []
    for s, obj in enumerate(raw_species):
        where = f"species[{s}]"
        rd = _Reader(obj, where, _SPECIES_KEYS)

        g = _Reader(rd.raw("growth"), rd.loc("growth"), _GROWTH_KEYS)
        kind = g.string("kind", "logistic")
        if kind not in GROWTH_KINDS:
            raise ScenarioError(f"kind must be one of {sorted(GROWTH_KINDS)}", g.loc("kind"))
        growth = GrowthModel(kind=kind, r=g.number("r"), k=g.number("k"), gamma=g.number("gamma", 1.0))

        e = _Reader(rd.raw("economics"), rd.loc("economics"), _ECON_KEYS)
        econ = Economics(p0=e.number("p0"), p1=e.number("p1"), c=e.number("c"), alpha=e.number("alpha", 1.0))

        inter = _Reader(rd.raw("interactions", {}), rd.loc("interactions"), _INTERACTION_KEYS)
        pair_terms = []
        for m, t in enumerate(inter.array("pairs", [])):
            tr = _Reader(t, f"{inter.loc('pairs')}[{m}]", _PAIR_KEYS)
            pair_terms.append(
                PairTerm(
                    j=resolve(tr.raw("species"), tr.loc("species")),
                    c=tr.number("c"),
                    beta=tr.number("beta", 1.0),
                    gamma=tr.number("gamma", 1.0),
                )
            )
        triple_terms = []
        for m, t in enumerate(inter.array("triples", [])):
            tr = _Reader(t, f"{inter.loc('triples')}[{m}]", _TRIPLE_KEYS)
            refs = tr.array("species")
            if len(refs) != 2:
                raise ScenarioError("expected exactly two species names", tr.loc("species"))
            triple_terms.append(
                TripleTerm(
                    j=resolve(refs[0], tr.loc("species") + "[0]"),
                    k=resolve(refs[1], tr.loc("species") + "[1]"),
                    c=tr.number("c"),
                    beta=tr.number("beta", 1.0),
                    gamma_j=tr.number("gamma_j", 1.0),
                    gamma_k=tr.number("gamma_k", 1.0),
                )
            )

        species.append(
            Species(
                name=names[s],
                growth=growth,
                econ=econ,
                interactions=InteractionRow(tuple(pair_terms), tuple(triple_terms)),
                x0=rd.number("x0"),
                xT=rd.number("xT"),
                h_min=rd.number("h_min", 0.0),
                h_max=rd.number("h_max"),
            )
        )

    return Scenario(
        species=tuple(species),
        horizon=top.number("horizon"),
        delta=top.number("discount", 0.05),
        settings=_parse_settings(top.raw("solver", None)),
        name=top.string("name", ""),
    )


def parse(text: str) -> Scenario:
    """Parse a scenario JSON document; defaults are applied to omitted optional fields."""
    if not text.strip():
        raise ScenarioError("empty document", "line 1 column 1")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return from_dict(doc)


def load(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def to_dict(scenario: Scenario) -> dict[str, Any]:
    names = scenario.names
    species = []
    for sp in scenario.species:
        growth = {"kind": sp.growth.kind, "r": sp.growth.r, "k": sp.growth.k}
        if sp.growth.kind == "modified-logistic" or sp.growth.gamma != 1.0:
            growth["gamma"] = sp.growth.gamma
        species.append(
            {
                "name": sp.name,
                "growth": growth,
                "economics": asdict(sp.econ),
                "interactions": {
                    "pairs": [
                        {"species": names[t.j], "c": t.c, "beta": t.beta, "gamma": t.gamma}
                        for t in sp.interactions.pair_terms
                    ],
                    "triples": [
                        {
                            "species": [names[t.j], names[t.k]],
                            "c": t.c,
                            "beta": t.beta,
                            "gamma_j": t.gamma_j,
                            "gamma_k": t.gamma_k,
                        }
                        for t in sp.interactions.triple_terms
                    ],
                },
                "x0": sp.x0,
                "xT": sp.xT,
                "h_min": sp.h_min,
                "h_max": sp.h_max,
            }
        )
    return {
        "name": scenario.name,
        "horizon": scenario.horizon,
        "discount": scenario.delta,
        "species": species,
        "solver": asdict(scenario.settings),
    }


def serialize(scenario: Scenario) -> str:
    return json.dumps(to_dict(scenario), indent=2) + "\n"


def base_case() -> Scenario:
    """The three-species base case shipped with the package."""
    text = resources.files("harvestopt").joinpath("data/base_case.json").read_text(encoding="utf-8")
    return parse(text)


# validation


def _rule(out, where, ok, message):
    if not ok:
        out.append(Violation(where, message))


def _positive(out, where, value, label):
    _rule(out, where, math.isfinite(value) and value > 0, f"{label} must be > 0")


def validate(scenario: Scenario) -> list[Violation]:
    """Every broken invariant, one :class:`Violation` each; empty when valid."""
    out: list[Violation] = []
    n = scenario.n
    _rule(out, "species", n >= 1, "at least one species is required")
    _positive(out, "horizon", scenario.horizon, "horizon")
    _rule(out, "discount", math.isfinite(scenario.delta) and scenario.delta >= 0, "discount must be >= 0")

    for i, sp in enumerate(scenario.species):
        w = f"species[{i}]"
        _positive(out, f"{w}.growth.r", sp.growth.r, "growth.r")
        _positive(out, f"{w}.growth.k", sp.growth.k, "growth.k")
        if sp.growth.kind == "modified-logistic":
            _rule(out, f"{w}.growth.gamma", math.isfinite(sp.growth.gamma) and sp.growth.gamma > 1,
                  "growth.gamma must be > 1 for the modified logistic law")
        _positive(out, f"{w}.economics.p0", sp.econ.p0, "economics.p0")
        _positive(out, f"{w}.economics.p1", sp.econ.p1, "economics.p1")
        _positive(out, f"{w}.economics.c", sp.econ.c, "economics.c")
        _rule(out, f"{w}.economics.alpha", math.isfinite(sp.econ.alpha) and sp.econ.alpha >= 1,
              "economics.alpha must be >= 1")
        _rule(out, f"{w}.x0", math.isfinite(sp.x0) and sp.x0 > 0, "initial stock must be > 0")
        _rule(out, f"{w}.xT", math.isfinite(sp.xT) and sp.xT > 0, "terminal stock must be > 0")
        _rule(out, f"{w}.h_min", math.isfinite(sp.h_min) and sp.h_min >= 0, "h_min must be >= 0")
        _rule(out, f"{w}.h_max", not math.isfinite(sp.h_min) or (math.isfinite(sp.h_max) and sp.h_max > sp.h_min),
              "h_max must be > h_min")

        seen = set()
        for m, t in enumerate(sp.interactions.pair_terms):
            tw = f"{w}.interactions.pairs[{m}]"
            _rule(out, f"{tw}.species", 0 <= t.j < n and t.j != i, "pair term must reference another species")
            _rule(out, tw, ("p", t.j) not in seen, "duplicate pair term")
            seen.add(("p", t.j))
            for name in ("c", "beta", "gamma"):
                _rule(out, f"{tw}.{name}", math.isfinite(getattr(t, name)), f"{name} must be finite")
        for m, t in enumerate(sp.interactions.triple_terms):
            tw = f"{w}.interactions.triples[{m}]"
            _rule(out, f"{tw}.species",
                  0 <= t.j < n and 0 <= t.k < n and i not in (t.j, t.k) and t.j < t.k,
                  "triple term must reference two other species in index order")
            _rule(out, tw, ("t", t.j, t.k) not in seen, "duplicate triple term")
            seen.add(("t", t.j, t.k))
            for name in ("c", "beta", "gamma_j", "gamma_k"):
                _rule(out, f"{tw}.{name}", math.isfinite(getattr(t, name)), f"{name} must be finite")

    st = scenario.settings
    _rule(out, "solver.n_steps", st.n_steps >= 2, "n_steps must be >= 2")
    _rule(out, "solver.control_tol", math.isfinite(st.control_tol) and st.control_tol >= 0,
          "control_tol must be >= 0")
    sh = st.shooting
    _rule(out, "solver.shooting.k_max", math.isfinite(sh.k_min) and math.isfinite(sh.k_max) and sh.k_min < sh.k_max,
          "k_min must be < k_max")
    _positive(out, "solver.shooting.tol_terminal", sh.tol_terminal, "tol_terminal")
    _rule(out, "solver.shooting.max_iters", sh.max_iters >= 2, "max_iters must be >= 2")
    _rule(out, "solver.shooting.secant_guard", math.isfinite(sh.secant_guard) and sh.secant_guard >= 0,
          "secant_guard must be >= 0")
    cc = st.ccd
    _positive(out, "solver.ccd.tol_k_change", cc.tol_k_change, "tol_k_change")
    _rule(out, "solver.ccd.max_outer_iters", cc.max_outer_iters >= 1, "max_outer_iters must be >= 1")
    _positive(out, "solver.ccd.warm_halfwidth", cc.warm_halfwidth, "warm_halfwidth")
    _rule(out, "solver.ccd.coupling", cc.coupling in COUPLINGS, f"coupling must be one of {COUPLINGS}")
    _positive(out, "solver.ccd.shooting_tol", cc.shooting_tol, "shooting_tol")
    return out
