import numpy as np
import pytest

from harvestopt import ccd
from harvestopt.model import Economics, GrowthModel, InteractionRow, PairTerm
from harvestopt.scenario import Scenario, Species, base_case


@pytest.fixture(scope="session")
def base():
    return base_case()


@pytest.fixture(scope="session")
def base_solution(base):
    return ccd.solve(base)


def make_species(name="a", r=0.5, k=1000.0, p0=0.9, p1=0.01, c=75.0, alpha=1.1,
                 x0=150.0, xT=500.0, h_min=0.0, h_max=25.0, pairs=(), kind="logistic", gamma=1.0):
    return Species(
        name=name,
        growth=GrowthModel(kind, r, k, gamma),
        econ=Economics(p0, p1, c, alpha),
        interactions=InteractionRow(tuple(pairs), ()),
        x0=x0, xT=xT, h_min=h_min, h_max=h_max,
    )


def single_species(**kw) -> Scenario:
    return Scenario(species=(make_species(**kw),), horizon=10.0, delta=0.05, name="single")


def twins(c=2e-4) -> Scenario:
    a = make_species("a", pairs=[PairTerm(1, c, 1.0, 1.0)], x0=200.0, xT=680.0)
    b = make_species("b", pairs=[PairTerm(0, c, 1.0, 1.0)], x0=200.0, xT=680.0)
    return Scenario(species=(a, b), horizon=10.0, delta=0.05, name="twins")


def rng(seed=0):
    return np.random.default_rng(seed)


# acceptance report lines, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
