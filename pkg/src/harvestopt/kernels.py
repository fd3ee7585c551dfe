"""Hot numeric loops.

Everything here works on packed float arrays so it compiles under numba
``nopython`` mode; see :func:`harvestopt.scenario.pack` for the layout.
Inputs are assumed valid (positive stocks, consistent shapes). The public
wrappers in :mod:`harvestopt.model`, :mod:`harvestopt.trajectory` and
:mod:`harvestopt.simulate` do the checking.
"""

import math

import numpy as np

from ._jit import njit

# growth kinds
LOGISTIC = 0
MODIFIED_LOGISTIC = 1
GOMPERTZ = 2

# columns of the per-species parameter table
KIND = 0
R = 1
CAP = 2
GAMMA = 3
P0 = 4
P1 = 5
COST = 6
ALPHA = 7
HMIN = 8
HMAX = 9
N_PARAMS = 10

# columns of the pair-term table
PAIR_OWNER = 0
PAIR_OTHER = 1
PAIR_C = 2
PAIR_BETA = 3
PAIR_GAMMA = 4

# columns of the triple-term table
TRI_OWNER = 0
TRI_J = 1
TRI_K = 2
TRI_C = 3
TRI_BETA = 4
TRI_GJ = 5
TRI_GK = 6

# node clamp markers
INTERIOR = 0
AT_MIN = 1
AT_MAX = 2

# build_path status codes
OK = 0
STOCK_NONPOSITIVE = 1
COSTATE_OVERFLOW = 2

# exp() overflows just above this
_LOG_MAX = 709.0
# node control: residual gap at which bisection may stop
_RES_TOL = 1e-12


@njit(cache=True, nogil=True)
def growth(kind, r, cap, gamma, x):
    if kind == LOGISTIC:
        return r * x * (1.0 - x / cap)
    if kind == MODIFIED_LOGISTIC:
        return r * x**gamma * (1.0 - x / cap)
    return r * x * math.log(cap / x)


@njit(cache=True, nogil=True)
def growth_dx(kind, r, cap, gamma, x):
    if kind == LOGISTIC:
        return r * (1.0 - 2.0 * x / cap)
    if kind == MODIFIED_LOGISTIC:
        return r * (gamma * x ** (gamma - 1.0) * (1.0 - x / cap) - x**gamma / cap)
    return r * (math.log(cap / x) - 1.0)


@njit(cache=True, nogil=True)
def interaction(i, x, pairs, triples):
    """Coupling term of species ``i``; zero-coefficient terms are skipped."""
    total = 0.0
    for m in range(pairs.shape[0]):
        if int(pairs[m, PAIR_OWNER]) != i or pairs[m, PAIR_C] == 0.0:
            continue
        j = int(pairs[m, PAIR_OTHER])
        total += pairs[m, PAIR_C] * x[i] ** pairs[m, PAIR_BETA] * x[j] ** pairs[m, PAIR_GAMMA]
    for m in range(triples.shape[0]):
        if int(triples[m, TRI_OWNER]) != i or triples[m, TRI_C] == 0.0:
            continue
        j = int(triples[m, TRI_J])
        k = int(triples[m, TRI_K])
        total += (
            triples[m, TRI_C]
            * x[i] ** triples[m, TRI_BETA]
            * x[j] ** triples[m, TRI_GJ]
            * x[k] ** triples[m, TRI_GK]
        )
    return total


@njit(cache=True, nogil=True)
def interaction_dxi(i, x, pairs, triples):
    """Partial of species ``i``'s coupling term with respect to its own stock."""
    total = 0.0
    for m in range(pairs.shape[0]):
        if int(pairs[m, PAIR_OWNER]) != i or pairs[m, PAIR_C] == 0.0:
            continue
        j = int(pairs[m, PAIR_OTHER])
        beta = pairs[m, PAIR_BETA]
        if beta == 0.0:
            continue
        total += pairs[m, PAIR_C] * beta * x[i] ** (beta - 1.0) * x[j] ** pairs[m, PAIR_GAMMA]
    for m in range(triples.shape[0]):
        if int(triples[m, TRI_OWNER]) != i or triples[m, TRI_C] == 0.0:
            continue
        beta = triples[m, TRI_BETA]
        if beta == 0.0:
            continue
        j = int(triples[m, TRI_J])
        k = int(triples[m, TRI_K])
        total += (
            triples[m, TRI_C]
            * beta
            * x[i] ** (beta - 1.0)
            * x[j] ** triples[m, TRI_GJ]
            * x[k] ** triples[m, TRI_GK]
        )
    return total


@njit(cache=True, nogil=True)
def interaction_cross(owner, wrt, x, pairs, triples):
    """Partial of species ``owner``'s coupling term with respect to ``x[wrt]``, ``wrt != owner``."""
    total = 0.0
    for m in range(pairs.shape[0]):
        if int(pairs[m, PAIR_OWNER]) != owner or int(pairs[m, PAIR_OTHER]) != wrt:
            continue
        c = pairs[m, PAIR_C]
        g = pairs[m, PAIR_GAMMA]
        if c == 0.0 or g == 0.0:
            continue
        total += c * x[owner] ** pairs[m, PAIR_BETA] * g * x[wrt] ** (g - 1.0)
    for m in range(triples.shape[0]):
        if int(triples[m, TRI_OWNER]) != owner or triples[m, TRI_C] == 0.0:
            continue
        j = int(triples[m, TRI_J])
        k = int(triples[m, TRI_K])
        c = triples[m, TRI_C]
        gj = triples[m, TRI_GJ]
        gk = triples[m, TRI_GK]
        base = c * x[owner] ** triples[m, TRI_BETA]
        if j == wrt and gj != 0.0:
            total += base * gj * x[j] ** (gj - 1.0) * x[k] ** gk
        elif k == wrt and gk != 0.0:
            total += base * x[j] ** gj * gk * x[k] ** (gk - 1.0)
    return total


@njit(cache=True, nogil=True)
def profit(p0, p1, c, alpha, x, h):
    return p0 * h - p1 * h * h - c * h**alpha / x


@njit(cache=True, nogil=True)
def profit_dh(p0, p1, c, alpha, x, h):
    # 0.0 ** 0.0 == 1.0, so alpha == 1 gives c / x at h == 0
    return p0 - 2.0 * p1 * h - c * alpha * h ** (alpha - 1.0) / x


@njit(cache=True, nogil=True)
def profit_dx(p0, p1, c, alpha, x, h):
    return c * h**alpha / (x * x)


@njit(cache=True, nogil=True)
def species_rate(i, x, h, params, pairs, triples):
    """Net rate of change of species ``i``: growth - coupling - harvest."""
    p = params[i]
    return growth(int(p[KIND]), p[R], p[CAP], p[GAMMA], x[i]) - interaction(i, x, pairs, triples) - h


@njit(cache=True, nogil=True)
def node_control(target, disc, p0, p1, c, alpha, x, hmin, hmax, tol):
    """Solve ``disc * profit_dh(u) == target`` on ``[hmin, hmax]``.

    The residual is strictly decreasing in ``u``, so a residual that is
    already non-positive at ``hmin`` pins the control to the lower bound and
    one still non-negative at ``hmax`` pins it to the upper bound.
    Bisection runs until the bracket is narrower than ``tol`` and the
    residual varies by less than ``_RES_TOL`` across it, or until it cannot
    be split further in floating point.
    """
    res_lo = disc * profit_dh(p0, p1, c, alpha, x, hmin) - target
    if res_lo <= 0.0:
        return hmin, AT_MIN
    res_hi = disc * profit_dh(p0, p1, c, alpha, x, hmax) - target
    if res_hi >= 0.0:
        return hmax, AT_MAX
    lo = hmin
    hi = hmax
    # the residual has unbounded slope at u = 0 when alpha < 2, so a narrow
    # bracket in u alone does not pin the coordination identity
    while hi - lo > tol or res_lo - res_hi > _RES_TOL:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        res = disc * profit_dh(p0, p1, c, alpha, x, mid) - target
        if res > 0.0:
            lo = mid
            res_lo = res
        else:
            hi = mid
            res_hi = res
    return 0.5 * (lo + hi), INTERIOR


@njit(cache=True, nogil=True)
def coupled_costate_term(i, k, x, companions, d, params, pairs, triples):
    """Sensitivity of the companions' profit rate to ``x[i]`` at node ``k``.

    Companion stocks are frozen paths, so their harvests are whatever the
    dynamics imply; raising ``x[i]`` changes each companion's coupling term
    and hence its implied harvest.
    """
    total = 0.0
    n = x.shape[0]
    for j in range(n):
        if j == i:
            continue
        dg = interaction_cross(j, i, x, pairs, triples)
        if dg == 0.0:
            continue
        p = params[j]
        hj = species_rate(j, x, 0.0, params, pairs, triples) - (companions[j, k + 1] - companions[j, k]) / d
        hj = min(max(hj, p[HMIN]), p[HMAX])
        total += profit_dh(p[P0], p[P1], p[COST], p[ALPHA], x[j], hj) * dg
    return total


@njit(cache=True, nogil=True)
def build_path(K, i, x0, companions, d, delta, params, pairs, triples, joint, control_tol):
    """Extremal of species ``i`` for coordination constant ``K``.

    Returns ``(stocks, harvests, flags, log_e, acc, status, node)``. ``log_e``
    and ``acc`` hold the two running coordination terms at every node.
    On failure ``status`` is non-zero, ``node`` is the first bad node and the
    arrays are filled up to (not including) that node.
    """
    n_nodes = companions.shape[1]
    n_steps = n_nodes - 1
    stocks = np.zeros(n_nodes)
    harvests = np.zeros(n_nodes)
    flags = np.zeros(n_nodes, dtype=np.int8)
    log_e = np.zeros(n_nodes)
    acc = np.zeros(n_nodes)
    p = params[i]
    kind = int(p[KIND])
    x = np.empty(companions.shape[0])

    xi = x0
    stocks[0] = xi
    le = 0.0
    a = 0.0
    for k in range(n_steps):
        t = k * d
        for m in range(x.shape[0]):
            x[m] = companions[m, k]
        x[i] = xi
        e = math.exp(le)
        disc = math.exp(-delta * t)
        u, flag = node_control((K - a) / e, disc, p[P0], p[P1], p[COST], p[ALPHA], xi, p[HMIN], p[HMAX], control_tol)
        harvests[k] = u
        flags[k] = flag

        fx = growth_dx(kind, p[R], p[CAP], p[GAMMA], xi) - interaction_dxi(i, x, pairs, triples)
        fprofit_x = profit_dx(p[P0], p[P1], p[COST], p[ALPHA], xi, u)
        if joint:
            fprofit_x -= coupled_costate_term(i, k, x, companions, d, params, pairs, triples)
        a += disc * fprofit_x * e * d
        le += fx * d
        xi = xi + species_rate(i, x, u, params, pairs, triples) * d

        if le > _LOG_MAX:
            return stocks, harvests, flags, log_e, acc, COSTATE_OVERFLOW, k + 1
        if not xi > 0.0:
            return stocks, harvests, flags, log_e, acc, STOCK_NONPOSITIVE, k + 1
        stocks[k + 1] = xi
        log_e[k + 1] = le
        acc[k + 1] = a

    harvests[n_steps] = harvests[n_steps - 1]
    flags[n_steps] = flags[n_steps - 1]
    return stocks, harvests, flags, log_e, acc, OK, -1


@njit(cache=True, nogil=True)
def integrate(x0, harvests, d, params, pairs, triples):
    """Simultaneous forward Euler under a per-node harvest schedule.

    Returns ``(stocks, node)`` with ``node == -1`` on success, else the first
    node whose stock is not positive.
    """
    n, n_nodes = harvests.shape
    stocks = np.zeros((n, n_nodes))
    x = x0.copy()
    nxt = np.empty(n)
    stocks[:, 0] = x
    for k in range(n_nodes - 1):
        for i in range(n):
            nxt[i] = x[i] + species_rate(i, x, harvests[i, k], params, pairs, triples) * d
        for i in range(n):
            if not nxt[i] > 0.0:
                return stocks, k + 1
            x[i] = nxt[i]
            stocks[i, k + 1] = x[i]
    return stocks, -1


@njit(cache=True, nogil=True)
def run_to_rest(x0, d, tol, max_steps, params, pairs, triples):
    """Unharvested Euler run until every species moves slower than ``tol`` per year.

    Returns ``(stocks, steps_taken, converged, node)``; ``node`` is -1 unless
    a stock hit zero.
    """
    n = x0.shape[0]
    x = x0.copy()
    nxt = np.empty(n)
    for step in range(max_steps + 1):
        fastest = 0.0
        for i in range(n):
            rate = species_rate(i, x, 0.0, params, pairs, triples)
            fastest = max(fastest, abs(rate))
            nxt[i] = x[i] + rate * d
        if fastest < tol:
            return x, step, True, -1
        if step == max_steps:
            break
        for i in range(n):
            if not nxt[i] > 0.0:
                return x, step, False, step + 1
            x[i] = nxt[i]
    return x, max_steps, False, -1


@njit(cache=True, nogil=True)
def objective(stocks, harvests, d, delta, params):
    """Left-rectangle discounted revenue over nodes ``0 .. N-1``."""
    n, n_nodes = stocks.shape
    total = 0.0
    for k in range(n_nodes - 1):
        disc = math.exp(-delta * k * d)
        for i in range(n):
            p = params[i]
            total += profit(p[P0], p[P1], p[COST], p[ALPHA], stocks[i, k], harvests[i, k]) * disc * d
    return total
