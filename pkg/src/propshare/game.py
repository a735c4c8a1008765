"""Game data model and pure evaluation functions.

A game is a preference matrix ``w`` (users x machines) plus a
:class:`GameConfig`.  Bids ``x`` are an (m, n) array whose rows sum to each
user's budget.  Machine prices are the column sums of the bids and every user
receives the fraction ``x_ij / (eps + Y_j)`` of machine ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError

SUM_TOL = 1e-9
RECOMPUTE_TOL = 1e-12


@dataclass(frozen=True)
class GameConfig:
    """Static description of a game instance.

    ``parallelism_bounds`` is ``None`` for the infinite parallelism model,
    otherwise one integer bound per user.
    """

    num_users: int
    num_machines: int
    budgets: np.ndarray = field(default=None)
    parallelism_bounds: np.ndarray | None = None
    epsilon_reservation: float = 0.0

    def __post_init__(self):
        m, n = self.num_users, self.num_machines
        if int(m) != m or m < 1:
            raise ParameterError(f"num_users must be a positive integer, got {m}")
        if int(n) != n or n < 1:
            raise ParameterError(f"num_machines must be a positive integer, got {n}")
        budgets = np.ones(m) if self.budgets is None else np.asarray(self.budgets, dtype=float)
        if budgets.ndim == 0:
            budgets = np.full(m, float(budgets))
        if budgets.shape != (m,):
            raise DimensionError(f"budgets has shape {budgets.shape}, expected ({m},)")
        if not np.all(budgets > 0):
            raise ParameterError("every budget must be positive")
        budgets.setflags(write=False)
        object.__setattr__(self, "budgets", budgets)

        bounds = self.parallelism_bounds
        if bounds is not None:
            bounds = np.asarray(bounds)
            if bounds.ndim == 0:
                bounds = np.full(m, int(bounds))
            if bounds.shape != (m,):
                raise DimensionError(f"parallelism_bounds has shape {bounds.shape}, expected ({m},)")
            if not np.all(bounds == np.round(bounds)):
                raise ParameterError("parallelism bounds must be integers")
            bounds = bounds.astype(np.int64)
            if np.any(bounds < 1) or np.any(bounds > n):
                raise ParameterError(f"parallelism bounds must lie in [1, {n}]")
            bounds.setflags(write=False)
            object.__setattr__(self, "parallelism_bounds", bounds)
        if not (self.epsilon_reservation >= 0):
            raise ParameterError("epsilon_reservation must be nonnegative")

    @property
    def finite(self) -> bool:
        return self.parallelism_bounds is not None

    def bound(self, i: int) -> int:
        """Parallelism bound of user ``i`` (``n`` under infinite parallelism)."""
        if self.parallelism_bounds is None:
            return self.num_machines
        return int(self.parallelism_bounds[i])

    def bounds_array(self) -> np.ndarray:
        if self.parallelism_bounds is None:
            return np.full(self.num_users, self.num_machines, dtype=np.int64)
        return np.asarray(self.parallelism_bounds)


def validate_preferences(weights, normalized=False) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise DimensionError(f"weights must be a 2-d array, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError("weights must be finite and nonnegative")
    if normalized:
        dev = np.abs(w.sum(axis=1) - 1.0)
        if np.any(dev > RECOMPUTE_TOL):
            raise ParameterError(f"weight rows must sum to 1 (max deviation {dev.max():.3g})")
    return w


def normalize_rows(weights) -> np.ndarray:
    """Divide every row by its sum; all-zero rows are left as zeros."""
    w = np.asarray(weights, dtype=float)
    s = w.sum(axis=1, keepdims=True)
    return np.divide(w, s, out=np.zeros_like(w), where=s > 0)


def validate_bids(bids, config: GameConfig | None = None) -> np.ndarray:
    """Check the bid-matrix invariants and return the bids as a float array."""
    x = np.asarray(bids, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"bids must be a 2-d array, got shape {x.shape}")
    if np.any(x < 0):
        raise ParameterError("bids must be nonnegative")
    if config is None:
        return x
    if x.shape != (config.num_users, config.num_machines):
        raise DimensionError(
            f"bids have shape {x.shape}, expected ({config.num_users}, {config.num_machines})"
        )
    dev = np.abs(x.sum(axis=1) - config.budgets)
    if np.any(dev > SUM_TOL):
        i = int(np.argmax(dev))
        raise ParameterError(f"bids of user {i} sum to {x[i].sum()!r}, budget is {config.budgets[i]!r}")
    if config.finite:
        support = np.count_nonzero(x > 0, axis=1)
        over = np.nonzero(support > config.parallelism_bounds)[0]
        if over.size:
            i = int(over[0])
            raise ParameterError(
                f"user {i} bids on {support[i]} machines, bound is {config.parallelism_bounds[i]}"
            )
    return x


def compute_prices(bids, eps: float = 0.0) -> np.ndarray:
    """Machine prices ``Y_j = sum_i x_ij``.

    ``eps`` is accepted for signature symmetry but never added to the price;
    the reservation only enters allocation and marginal denominators.
    """
    return np.asarray(bids, dtype=float).sum(axis=0)


def compute_allocation(bids, eps: float = 0.0) -> np.ndarray:
    x = np.asarray(bids, dtype=float)
    if eps < 0:
        raise ParameterError("eps must be nonnegative")
    denom = eps + compute_prices(x)
    return np.divide(x, denom, out=np.zeros_like(x), where=denom > 0)


def utility_linear(weights_row, alloc_row) -> float:
    w = np.asarray(weights_row, dtype=float)
    r = np.asarray(alloc_row, dtype=float)
    if w.shape != r.shape:
        raise DimensionError(f"weights {w.shape} and allocation {r.shape} differ in length")
    return float(np.dot(w, r))


def utility_finite(weights_row, alloc_row, k: int) -> float:
    """Sum of the ``k`` largest products ``w_j * r_j``.

    Equal products are taken in machine-index order, which only matters for
    which machines are reported, not for the value.
    """
    w = np.asarray(weights_row, dtype=float)
    r = np.asarray(alloc_row, dtype=float)
    if w.shape != r.shape:
        raise DimensionError(f"weights {w.shape} and allocation {r.shape} differ in length")
    n = w.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ParameterError(f"parallelism bound k must lie in [1, {n}], got {k}")
    if k == n:
        return float(np.dot(w, r))
    prod = w * r
    order = np.argsort(-prod, kind="stable")
    return float(prod[order[:k]].sum())


def user_utilities(weights, alloc, bounds=None) -> np.ndarray:
    """Utility of every user for its own allocation row."""
    w = np.asarray(weights, dtype=float)
    r = np.asarray(alloc, dtype=float)
    if w.shape != r.shape:
        raise DimensionError(f"weights {w.shape} and allocation {r.shape} differ in shape")
    if bounds is None:
        return np.einsum("ij,ij->i", w, r)
    prod = w * r
    return _top_k_sums(prod, np.asarray(bounds))


def bundle_utilities(weights, alloc, bounds=None) -> np.ndarray:
    """Matrix ``V[i, j] = U_i(r_j)``: user i's value for user j's bundle.

    Under finite parallelism the bundle is valued with the envier's bound k_i.
    """
    w = np.asarray(weights, dtype=float)
    r = np.asarray(alloc, dtype=float)
    if bounds is None:
        return w @ r.T
    bounds = np.asarray(bounds)
    m, n = w.shape
    out = np.empty((m, m))
    for k in np.unique(bounds):
        rows = np.nonzero(bounds == k)[0]
        prod = w[rows, None, :] * r[None, :, :]
        if k >= n:
            out[rows] = prod.sum(axis=2)
        else:
            part = np.partition(prod, n - k, axis=2)[:, :, n - k:]
            out[rows] = part.sum(axis=2)
    return out


def _top_k_sums(prod, bounds):
    m, n = prod.shape
    out = np.empty(m)
    for k in np.unique(bounds):
        rows = np.nonzero(bounds == k)[0]
        if k >= n:
            out[rows] = prod[rows].sum(axis=1)
        else:
            out[rows] = np.partition(prod[rows], n - k, axis=1)[:, n - k:].sum(axis=1)
    return out


def validate_strong_competitiveness(weights) -> list[int]:
    """Machines (0-based) that fewer than two users value positively."""
    w = validate_preferences(weights)
    counts = np.count_nonzero(w > 0, axis=0)
    return [int(j) for j in np.nonzero(counts < 2)[0]]


def marginal_utilities(weights, bids, eps: float = 0.0) -> np.ndarray:
    """Partial derivatives ``w_ij (eps + Y_j - x_ij) / (eps + Y_j)^2``.

    Entries with a zero denominator are ``+inf`` when the weight is positive
    (an unclaimed machine is worth grabbing at any price) and 0 otherwise.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(bids, dtype=float)
    denom = eps + compute_prices(x)
    opp = denom[None, :] - x
    with np.errstate(divide="ignore", invalid="ignore"):
        marg = w * opp / denom[None, :] ** 2
    zero = np.broadcast_to(denom <= 0, marg.shape)
    marg = np.where(zero, np.where(w > 0, np.inf, 0.0), marg)
    return marg
