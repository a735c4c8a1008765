"""Social optima and closed-form reference equilibria."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import ParameterError
from .game import (
    GameConfig,
    compute_allocation,
    normalize_rows,
    validate_preferences,
)

ALPHA_THRESHOLD = (2 + math.sqrt(2)) / 4
FOC_TOL = 1e-8
_DOUBLE_ROOT_TOL = 1e-12


def social_optimum_infinite(weights):
    """Total utility when every machine goes wholly to a user valuing it most.

    Returns ``(value, owner)`` where ``owner[j]`` is the receiving user
    (lowest index among ties).
    """
    w = validate_preferences(weights)
    owner = np.argmax(w, axis=0)
    value = float(w[owner, np.arange(w.shape[1])].sum())
    return value, owner


@dataclass(frozen=True)
class Matching:
    """Maximum-weight matching between user slots and machines.

    ``pairs`` holds ``(user, slot, machine)`` triples; slot numbers run from
    0 to ``k_i - 1`` within each user.
    """

    value: float
    pairs: tuple

    def allocation(self, num_users, num_machines):
        r = np.zeros((num_users, num_machines))
        for user, _, machine in self.pairs:
            r[user, machine] = 1.0
        return r


def max_weight_assignment(weight_matrix):
    """Maximum-weight matching on a complete bipartite graph with weights >= 0.

    Equivalent to padding the matrix with zero rows or columns to a square
    and solving the assignment problem; the smaller side is matched fully.
    Returns a list of ``(row, col)`` pairs.
    """
    a = np.asarray(weight_matrix, dtype=float)
    if a.size == 0:
        return []
    if a.shape[0] <= a.shape[1]:
        cols = _backend.kernels.hungarian_min(np.ascontiguousarray(-a))
        return [(int(r), int(c)) for r, c in enumerate(cols)]
    rows = _backend.kernels.hungarian_min(np.ascontiguousarray(-a.T))
    return sorted((int(r), int(c)) for c, r in enumerate(rows))


def slot_matrix(weights, bounds):
    """Rows are user slots (user i repeated ``min(k_i, n)`` times)."""
    w = validate_preferences(weights)
    n = w.shape[1]
    bounds = np.broadcast_to(np.asarray(bounds, dtype=np.int64), (w.shape[0],))
    owners = np.repeat(np.arange(w.shape[0]), np.minimum(bounds, n))
    return w[owners], owners


def social_optimum_finite(weights, bounds) -> Matching:
    """Social optimum under per-user parallelism bounds via max-weight matching."""
    w = validate_preferences(weights)
    if np.any(np.asarray(bounds) < 1):
        raise ParameterError("parallelism bounds must be >= 1")
    slots, owners = slot_matrix(w, bounds)
    first_slot = np.searchsorted(owners, np.arange(w.shape[0]))
    pairs = []
    for s, j in max_weight_assignment(slots):
        i = int(owners[s])
        pairs.append((i, s - int(first_slot[i]), j))
    pairs.sort(key=lambda p: p[2])
    value = 0.0
    for i, _, j in pairs:
        value += w[i, j]
    return Matching(value=float(value), pairs=tuple(pairs))


def optimum_value(weights, bounds=None) -> float:
    if bounds is None:
        return social_optimum_infinite(weights)[0]
    return social_optimum_finite(weights, bounds).value


def optimum_allocation(weights, bounds=None) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    m, n = w.shape
    if bounds is None:
        r = np.zeros((m, n))
        _, owner = social_optimum_infinite(w)
        r[owner, np.arange(n)] = 1.0
        return r
    return social_optimum_finite(w, bounds).allocation(m, n)


# --- two-player, two-machine games -------------------------------------------

@dataclass(frozen=True)
class TwoPlayerEquilibrium:
    """Bids ``x`` (user 1) and ``y`` (user 2) on machine 1 of a 2x2 game.

    ``delta`` is ``(2 - s) / s`` with ``s = x + y`` the price of machine 1.
    ``kind`` is "symmetric", "asymmetric" or "threshold" (double root).
    """

    alpha: float
    delta: float
    x: float
    y: float
    utilities: tuple
    welfare: float
    efficiency: float
    foc_residual: float
    kind: str

    def bids(self):
        return two_player_bids(self.x, self.y)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")


def equal_weight_game(alpha):
    _check_alpha(alpha)
    return np.array([[alpha, 1 - alpha], [alpha, 1 - alpha]])


def opposite_weight_game(alpha):
    _check_alpha(alpha)
    return np.array([[alpha, 1 - alpha], [1 - alpha, alpha]])


def two_player_bids(x, y):
    return np.array([[x, 1 - x], [y, 1 - y]])


def _first_order_residual(weights, x, y):
    """Max violation of the two users' equal-marginal conditions (interior bids)."""
    s, t = x + y, 2 - x - y
    r1 = weights[0, 0] * y / s**2 - weights[0, 1] * (1 - y) / t**2
    r2 = weights[1, 0] * x / s**2 - weights[1, 1] * (1 - x) / t**2
    return max(abs(r1), abs(r2))


def _two_player_result(alpha, weights, x, y, kind):
    r = compute_allocation(two_player_bids(x, y))
    util = (weights * r).sum(axis=1)
    welfare = float(util.sum())
    opt = social_optimum_infinite(weights)[0]
    s = x + y
    return TwoPlayerEquilibrium(
        alpha=alpha,
        delta=(2 - s) / s,
        x=x,
        y=y,
        utilities=(float(util[0]), float(util[1])),
        welfare=welfare,
        efficiency=welfare / opt,
        foc_residual=_first_order_residual(weights, x, y),
        kind=kind,
    )


def two_player_equal_weight_equilibrium(alpha) -> TwoPlayerEquilibrium:
    """Unique equilibrium of the game where both users weigh (alpha, 1-alpha)."""
    w = equal_weight_game(alpha)
    return _two_player_result(alpha, w, float(alpha), float(alpha), "symmetric")


def opposite_cubic_coefficient(alpha):
    _check_alpha(alpha)
    return 1 / (2 * alpha * (1 - alpha)) - 1


def opposite_cubic_roots(alpha):
    """Nonnegative roots of d^3 - c d^2 + c d - 1, factored as (d-1)(d^2-(c-1)d+1).

    Returns ``(roots, discriminant)``; the quadratic's roots are reciprocal.
    """
    c = opposite_cubic_coefficient(alpha)
    disc = (c - 1) ** 2 - 4
    if abs(disc) <= _DOUBLE_ROOT_TOL:
        return [1.0], disc
    if disc < 0:
        return [1.0], disc
    small = 2 / ((c - 1) + math.sqrt(disc))
    return [1.0, small, 1 / small], disc


def two_player_opposite_equilibria(alpha) -> list[TwoPlayerEquilibrium]:
    """All equilibria of the game with weights (alpha, 1-alpha) / (1-alpha, alpha)."""
    w = opposite_weight_game(alpha)
    roots, disc = opposite_cubic_roots(alpha)
    out = []
    for d in roots:
        x = 1 / (1 + (1 - alpha) * d * d / alpha)
        y = 1 / (1 + alpha * d * d / (1 - alpha))
        if abs(disc) <= _DOUBLE_ROOT_TOL:
            kind = "threshold"
        else:
            kind = "symmetric" if d == 1.0 else "asymmetric"
        out.append(_two_player_result(alpha, w, x, y, kind))
    return out


def symmetric_opposite_efficiency(alpha):
    """Efficiency of the proportional-bid equilibrium, ``2a + 1/a - 2`` for a >= 1/2."""
    a = max(alpha, 1 - alpha)
    return 2 * a + 1 / a - 2


# --- worst case ---------------------------------------------------------------

class WorstCase(NamedTuple):
    config: GameConfig
    weights: np.ndarray
    bids: np.ndarray


def worst_case_instance(n, eps_w=1e-9) -> WorstCase:
    """Low-efficiency instance with ``n^2 + n`` users on ``n`` machines.

    ``n^2`` users value all machines at 1/n and spread their budget evenly;
    ``n`` users each want one distinct machine (weight ``eps_w`` elsewhere,
    rows renormalized) and put their whole budget there.
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"worst case needs an integer n >= 2, got {n}")
    n = int(n)
    m = n * n + n
    w = np.empty((m, n))
    w[: n * n] = 1.0 / n
    focused = np.full((n, n), eps_w) + np.eye(n) * (1.0 - eps_w)
    w[n * n:] = normalize_rows(focused)
    x = np.zeros((m, n))
    x[: n * n] = 1.0 / n
    x[n * n:] = np.eye(n)
    return WorstCase(GameConfig(num_users=m, num_machines=n), w, x)


def utility_floor_bid(prices_excluding_i, budget=1.0) -> np.ndarray:
    """Bid the budget in proportion to the other users' totals.

    Every machine then yields the same share ``X / (X + sum(S))``, which is
    ``1/m`` when all budgets are 1.
    """
    s = np.asarray(prices_excluding_i, dtype=float)
    if np.any(s < 0):
        raise ParameterError("prices must be nonnegative")
    total = s.sum()
    if not total > 0:
        raise ParameterError("no opposing bids to track: all prices are zero")
    if not budget > 0:
        raise ParameterError("budget must be positive")
    return budget * s / total
