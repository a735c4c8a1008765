"""Iterated bid updates and equilibrium certification.

One iteration is a round-robin pass: users update in index order, each
against the live opponent totals left by the users before it.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GameError, IndifferentUserError, ParameterError, StrategyError
from .game import (
    GameConfig,
    compute_allocation,
    compute_prices,
    marginal_utilities,
    validate_bids,
    validate_preferences,
    validate_strong_competitiveness,
)
from .metrics import evaluate
from .optimum import optimum_value
from .strategies import (
    GreedyParams,
    best_response_infinite,
    greedy_adjust_step,
    local_search_finite,
)

log = logging.getLogger(__name__)

DYNAMICS_EPS = 1e-9
CRITERIA = ("utility", "marginal", "welfare")


@dataclass(frozen=True)
class ConvergenceCriterion:
    kind: str = "utility"
    tol: float = 1e-3
    max_iterations: int = 200

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}, got {self.kind!r}")
        if not self.tol > 0:
            raise ParameterError("convergence tolerance must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ParameterError("max_iterations must be a positive integer")


@dataclass(frozen=True)
class Snapshot:
    iteration: int
    bids: np.ndarray | None
    utilities: np.ndarray
    welfare: float
    efficiency: float
    uniformity: float
    envy: float
    envy_raw: float
    utility_gap: float
    marginal_gap: float
    welfare_change: float


@dataclass
class DynamicsTrace:
    snapshots: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    stabilization_iteration: int | None = None
    optimum: float = float("nan")
    final_bids: np.ndarray | None = None
    criterion: ConvergenceCriterion | None = None

    @property
    def iterations_to_converge(self):
        """Convergence iteration, or ``None`` when the run hit the cap."""
        return self.iterations if self.converged else None

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    def series(self, name):
        return np.array([getattr(s, name) for s in self.snapshots])


@dataclass(frozen=True)
class EquilibriumCertificate:
    kkt_residual: float
    lambdas: np.ndarray
    violations: list


def init_bids_weight_proportional(weights, budgets=None, bounds=None) -> np.ndarray:
    """Each user bids its budget in proportion to its weights.

    With a parallelism bound only the ``k_i`` largest weights are kept
    (lower index first on ties).  All-zero rows are split evenly.
    """
    w = validate_preferences(weights)
    m, n = w.shape
    budgets = np.ones(m) if budgets is None else np.broadcast_to(np.asarray(budgets, float), (m,))
    x = np.zeros((m, n))
    for i in range(m):
        row = w[i].copy()
        k = n if bounds is None else int(np.broadcast_to(bounds, (m,))[i])
        if k < n:
            keep = np.argsort(-row, kind="stable")[:k]
            trimmed = np.zeros(n)
            trimmed[keep] = row[keep]
            row = trimmed
        total = row.sum()
        if total > 0:
            x[i] = budgets[i] * row / total
        else:
            x[i, :k] = budgets[i] / k
    return x


def check_equilibrium(bids, weights, eps: float = 0.0, tol: float = 1e-9) -> EquilibriumCertificate:
    """Measure how far a bid profile is from satisfying the equal-marginal condition.

    Per user, lambda is the mean marginal over funded machines; the residual
    is the largest deviation from lambda on funded machines or excess above
    lambda on unfunded ones.  Pairs whose deviation exceeds ``tol`` are
    listed as violations.
    """
    x = validate_bids(bids)
    w = validate_preferences(weights)
    marg = marginal_utilities(w, x, eps)
    m = x.shape[0]
    lambdas = np.zeros(m)
    worst = 0.0
    violations = []
    for i in range(m):
        support = x[i] > 0
        if not support.any():
            continue
        lam = marg[i, support].mean()
        lambdas[i] = lam
        dev = np.where(support, np.abs(marg[i] - lam), np.maximum(marg[i] - lam, 0.0))
        worst = max(worst, float(dev.max()))
        violations.extend((i, int(j)) for j in np.nonzero(dev > tol)[0])
    return EquilibriumCertificate(kkt_residual=worst, lambdas=lambdas, violations=violations)


def _marginal_gap(w, x, eps):
    marg = marginal_utilities(w, x, eps)
    gap = 0.0
    for i in range(x.shape[0]):
        support = x[i] > 0
        if support.any():
            mi = marg[i, support]
            gap = max(gap, float(mi.max() - mi.min()))
    return gap


def stabilization_iteration(changes, tol, converged=False):
    """First iteration from which every welfare change stays within ``tol``.

    ``changes[t-1]`` is the welfare change of iteration ``t``.  A converged
    run is at rest after its last iteration, so it stabilizes no later than
    that; an unconverged run whose last change exceeds ``tol`` has not
    stabilized (``None``).
    """
    changes = np.asarray(changes, dtype=float)
    last = len(changes)
    if last == 0:
        return None
    above = np.nonzero(~(changes <= tol))[0]
    if above.size == 0:
        return 1
    t = int(above[-1]) + 2
    if t <= last:
        return t
    return last if converged else None


def make_update(strategy, config: GameConfig, greedy: GreedyParams | None = None) -> Callable:
    """Build ``update(i, row, y, w_row, budget, eps) -> new_row`` for a named strategy."""
    if callable(strategy):
        return strategy
    if strategy in ("br", "best-response"):
        if config.finite:
            raise ParameterError("the closed-form best response ignores parallelism bounds; use 'ls'")
        return lambda i, row, y, w, X, eps: best_response_infinite(w, y, X, eps)
    if strategy in ("ls", "local-search"):
        return lambda i, row, y, w, X, eps: local_search_finite(w, y, X, config.bound(i), eps)
    if strategy == "greedy":
        params = greedy or GreedyParams()
        bounded = config.finite
        return lambda i, row, y, w, X, eps: greedy_adjust_step(
            row, y, params, weights=w, eps=eps,
            max_support=config.bound(i) if bounded else None,
        )
    raise ParameterError(f"unknown strategy {strategy!r}")


def run_dynamics(config: GameConfig, weights, strategy="br",
                 criterion: ConvergenceCriterion | None = None, *,
                 initial_bids=None, greedy: GreedyParams | None = None,
                 eps: float | None = None, keep_bids: bool = True,
                 optimum: float | None = None) -> DynamicsTrace:
    """Iterate strategy updates until ``criterion`` holds or the cap is hit.

    ``eps`` defaults to the config's reservation, or 1e-9 if that is zero.
    Reported utilities and metrics always use the unperturbed allocation.
    See :func:`stabilization_iteration` for the welfare-stabilization rule.
    """
    criterion = criterion or ConvergenceCriterion()
    w = validate_preferences(weights)
    m, n = config.num_users, config.num_machines
    if w.shape != (m, n):
        raise ParameterError(f"weights have shape {w.shape}, config says ({m}, {n})")
    if eps is None:
        eps = config.epsilon_reservation or DYNAMICS_EPS
    weak = validate_strong_competitiveness(w)
    if weak and m > 1:
        warnings.warn(f"game is not strongly competitive on machines {weak}", stacklevel=2)
    bounds = config.parallelism_bounds
    if optimum is None:
        optimum = optimum_value(w, bounds)
    update = make_update(strategy, config, greedy)

    if initial_bids is None:
        x = init_bids_weight_proportional(w, config.budgets, bounds)
    else:
        x = np.array(validate_bids(initial_bids, config), dtype=float)

    trace = DynamicsTrace(optimum=optimum, criterion=criterion)

    def snapshot(t, prev):
        rep = evaluate(w, compute_allocation(x), bounds, optimum)
        if prev is None:
            ugap = wchange = float("nan")
        else:
            ugap = float(np.max(np.abs(rep.utilities - prev.utilities)))
            wchange = abs(rep.welfare - prev.welfare)
        snap = Snapshot(
            iteration=t,
            bids=x.copy() if keep_bids else None,
            utilities=rep.utilities,
            welfare=rep.welfare,
            efficiency=rep.efficiency,
            uniformity=rep.uniformity,
            envy=rep.envy,
            envy_raw=rep.envy_raw,
            utility_gap=ugap,
            marginal_gap=_marginal_gap(w, x, eps),
            welfare_change=wchange,
        )
        trace.snapshots.append(snap)
        return snap

    prev = snapshot(0, None)
    for t in range(1, criterion.max_iterations + 1):
        prices = compute_prices(x)
        for i in range(m):
            y = np.maximum(prices - x[i], 0.0)
            try:
                new = update(i, x[i], y, w[i], float(config.budgets[i]), eps)
            except IndifferentUserError:
                continue
            except GameError as exc:
                raise StrategyError(i, t, exc) from exc
            prices += new - x[i]
            x[i] = new
        cur = snapshot(t, prev)
        trace.iterations = t
        if criterion.kind == "utility":
            done = cur.utility_gap < criterion.tol
        elif criterion.kind == "marginal":
            done = cur.marginal_gap < criterion.tol
        else:
            done = cur.welfare_change <= criterion.tol
        if done:
            trace.converged = True
            break
        prev = cur
    trace.final_bids = x.copy()
    trace.stabilization_iteration = stabilization_iteration(
        trace.series("welfare_change")[1:], criterion.tol, trace.converged
    )
    log.debug("dynamics: converged=%s after %d iterations", trace.converged, trace.iterations)
    return trace
