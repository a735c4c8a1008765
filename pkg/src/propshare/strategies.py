"""Per-user bid updates.

``y`` is always the vector of opponents' total bids on each machine.  With a
reservation ``eps > 0`` every opponent total is treated as ``y + eps``, which
is the perturbed game where a phantom bidder holds ``eps`` on each machine.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .errors import DimensionError, IndifferentUserError, ParameterError, UnboundedMarginalError


@dataclass(frozen=True)
class GreedyParams:
    """Local greedy adjustment settings.

    ``step`` is the amount of money moved per adjustment; ``None`` means
    ``step_fraction`` of the user's budget.
    """

    step: float | None = None
    step_fraction: float = 0.01
    marginal_mode: str = "analytic"
    fd_h: float = 1e-6

    def __post_init__(self):
        if self.marginal_mode not in ("analytic", "finite-difference"):
            raise ParameterError(f"unknown marginal_mode {self.marginal_mode!r}")
        if self.step is not None and not self.step > 0:
            raise ParameterError("greedy step must be positive")
        if not 0 < self.step_fraction <= 1:
            raise ParameterError("step_fraction must lie in (0, 1]")
        if not self.fd_h > 0:
            raise ParameterError("fd_h must be positive")

    def step_for(self, budget: float) -> float:
        step = self.step if self.step is not None else self.step_fraction * budget
        if step > budget:
            raise ParameterError(f"greedy step {step} exceeds budget {budget}")
        return step


def _vectors(weights_row, y):
    w = np.ascontiguousarray(weights_row, dtype=float)
    yv = np.ascontiguousarray(y, dtype=float)
    if w.ndim != 1 or w.shape != yv.shape:
        raise DimensionError(f"weights {w.shape} and opponent bids {yv.shape} must be equal-length vectors")
    if np.any(w < 0) or np.any(yv < 0):
        raise ParameterError("weights and opponent bids must be nonnegative")
    return w, yv


def _check(w, y, X, eps, candidates):
    if not X > 0:
        raise ParameterError(f"budget must be positive, got {X}")
    if not eps >= 0:
        raise ParameterError(f"eps must be nonnegative, got {eps}")
    wc = w[candidates]
    if not np.any(wc > 0):
        raise IndifferentUserError("all weights on the candidate machines are zero")
    bad = candidates[(wc > 0) & (y[candidates] + eps <= 0)]
    if bad.size:
        raise UnboundedMarginalError(int(bad[0]))


def best_response_infinite(weights_row, y, X: float, eps: float = 0.0) -> np.ndarray:
    """Utility-maximizing bids on all machines (infinite parallelism).

    Sorts machines by ``w_j / y_j``, picks the largest prefix whose last
    member still gets a nonnegative bid, and spreads
    ``X + sum(y_prefix)`` proportionally to ``sqrt(w_j y_j)``.
    """
    w, yv = _vectors(weights_row, y)
    _check(w, yv, X, eps, np.arange(w.shape[0]))
    return _backend.kernels.best_response(w, yv, float(X), float(eps))[0]


def best_response_on_subset(weights_row, y, X: float, subset, eps: float = 0.0) -> np.ndarray:
    """Best response using only the machines in ``subset``; zero elsewhere."""
    w, yv = _vectors(weights_row, y)
    idx = np.unique(np.asarray(subset, dtype=np.intp))
    if idx.size == 0 or idx[0] < 0 or idx[-1] >= w.shape[0]:
        raise ParameterError("subset must be a nonempty set of machine indices")
    _check(w, yv, X, eps, idx)
    return _backend.kernels.best_response_subset(w, yv, float(X), float(eps), idx)[0]


def local_search_finite(weights_row, y, X: float, k: int, eps: float = 0.0) -> np.ndarray:
    """Best response heuristic when at most ``k`` machines may be used.

    Starts from the ``k`` machines with the highest ``w/y`` and applies
    single in/out swaps while the subset best response strictly improves.
    """
    w, yv = _vectors(weights_row, y)
    n = w.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ParameterError(f"parallelism bound must lie in [1, {n}], got {k}")
    _check(w, yv, X, eps, np.arange(n))
    return _backend.kernels.local_search(w, yv, float(X), int(k), float(eps))


def response_utility(weights_row, x, y, eps: float = 0.0) -> float:
    """``sum_j w_j x_j / (x_j + y_j + eps)``, counting 0/0 terms as 0."""
    w = np.asarray(weights_row, dtype=float)
    x = np.asarray(x, dtype=float)
    denom = x + np.asarray(y, dtype=float) + eps
    share = np.divide(x, denom, out=np.zeros_like(x), where=denom > 0)
    return float(np.dot(w, share))


def linear_utility_probe(weights_row, y, eps: float = 0.0) -> Callable[[np.ndarray], float]:
    """Black-box utility of a user's own bid row against fixed opponents."""
    w = np.array(weights_row, dtype=float)
    yv = np.array(y, dtype=float)
    return lambda row: response_utility(w, row, yv, eps)


def response_marginals(weights_row, x, y, eps: float = 0.0) -> np.ndarray:
    """``w_j (y_j + eps) / (x_j + y_j + eps)^2``; unclaimed valued machines are ``inf``."""
    w = np.asarray(weights_row, dtype=float)
    opp = np.asarray(y, dtype=float) + eps
    denom = (opp + np.asarray(x, dtype=float)) ** 2
    marg = np.zeros_like(w)
    pos = w > 0
    np.divide(w * opp, denom, out=marg, where=pos & (denom > 0))
    marg[pos & (denom <= 0)] = np.inf
    return marg


def fd_marginals(probe, x, h: float) -> np.ndarray:
    """Central differences of ``probe``; forward differences where ``x_j < h``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for j in range(x.shape[0]):
        up = x.copy()
        up[j] += h
        if x[j] >= h:
            down = x.copy()
            down[j] -= h
            out[j] = (probe(up) - probe(down)) / (2 * h)
        else:
            out[j] = (probe(up) - probe(x)) / h
    return out


def greedy_adjust_step(current_row, y, params: GreedyParams | None = None, *,
                       weights=None, utility_probe=None, eps: float = 0.0,
                       max_support: int | None = None) -> np.ndarray:
    """One local greedy adjustment of a bid row.

    Moves ``min(step, x_low)`` from the funded machine with the lowest
    marginal utility to the machine with the highest one.  Returns a copy of
    the input when all relevant marginals agree within 1e-12.  With
    ``max_support`` reached, money only moves inside the current support.
    """
    params = params or GreedyParams()
    x = np.ascontiguousarray(current_row, dtype=float)
    yv = np.ascontiguousarray(y, dtype=float)
    if x.ndim != 1 or x.shape != yv.shape:
        raise DimensionError("bid row and opponent bids must be equal-length vectors")
    n = x.shape[0]
    if n < 2:
        raise ParameterError("greedy adjustment needs at least two machines")
    if np.any(x < 0):
        raise ParameterError("bids must be nonnegative")
    budget = float(x.sum())
    step = params.step_for(budget)
    limit = n if max_support is None else int(max_support)
    kern = _backend.kernels
    if params.marginal_mode == "analytic":
        if weights is None:
            raise ParameterError("analytic marginals need the weight row")
        w, yv = _vectors(weights, yv)
        return kern.greedy_step(x, w, yv, step, float(eps), limit)
    if utility_probe is None:
        if weights is None:
            raise ParameterError("finite-difference marginals need a utility probe or weights")
        utility_probe = linear_utility_probe(weights, yv, eps)
    marg = np.ascontiguousarray(fd_marginals(utility_probe, x, params.fd_h))
    return kern.greedy_step_marginals(x, marg, step, limit)


def user_kkt_residual(weights_row, x, y, eps: float = 0.0) -> float:
    """Deviation of a bid row from the equal-marginal optimality condition.

    Max of |marginal - lambda| over funded machines and of the excess
    ``marginal - lambda`` over unfunded ones, with lambda the mean marginal
    over funded machines.
    """
    marg = response_marginals(weights_row, x, y, eps)
    support = np.asarray(x) > 0
    if not support.any():
        return float("inf")
    lam = marg[support].mean()
    res = float(np.max(np.abs(marg[support] - lam)))
    if (~support).any():
        res = max(res, float(np.max(marg[~support] - lam)), 0.0)
    return res
