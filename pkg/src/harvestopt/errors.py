"""Exception hierarchy."""


class HarvestOptError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HarvestOptError, ValueError):
    """Model evaluated outside its domain (non-positive stock, NaN, ...)."""


class ScenarioError(HarvestOptError):
    """Malformed scenario document.

    ``location`` is a dotted path into the document, e.g. ``species[1].growth.r``.
    """

    def __init__(self, message, location=""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class SolverError(HarvestOptError):
    """Numerical failure inside a solver."""


class InfeasiblePathError(SolverError):
    """An extremal or simulation left the positive-stock region.

    ``node`` is the first grid node where it happened; ``last_stock`` the last
    positive value before it.
    """

    def __init__(self, message, node, last_stock=float("nan"), species=None):
        self.node = node
        self.last_stock = last_stock
        self.species = species
        super().__init__(message)


class InfeasibleTargetError(SolverError):
    """Terminal target outside the reachable interval of the shooting function."""

    def __init__(self, message, reachable, species=None):
        self.reachable = reachable
        self.species = species
        super().__init__(message)


class NonConvergenceError(SolverError):
    """Iteration cap hit.

    ``best_residual`` is set by the shooting solver, ``history`` by the outer
    coordinate-descent loop.
    """

    def __init__(self, message, best_residual=None, history=None, species=None):
        self.best_residual = best_residual
        self.history = history
        self.species = species
        super().__init__(message)
