"""Slow reference solvers used to cross-check the fast routines.

None of these share code with the kernels they check: the best-response
oracles solve the dual or search numerically instead of sorting by
``w/y``, and the assignment oracle enumerates every injection.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize


def br_utility(w, y, x, eps=0.0):
    """Linear utility of own bids ``x`` against opponent totals ``y``."""
    yv = np.asarray(y, float) + eps
    x = np.asarray(x, float)
    den = x + yv
    share = np.divide(x, den, out=np.zeros_like(x), where=den > 0)
    return float(np.dot(w, share))


def best_response_dual(w, y, X, eps=0.0, iters=200):
    """Best response by bisection on the budget multiplier.

    For a multiplier ``lam`` the per-machine optimum is
    ``max(0, sqrt(w y / lam) - y)``; total spend decreases in ``lam``.
    """
    w = np.asarray(w, float)
    yv = np.asarray(y, float) + eps

    def spend(lam):
        return np.maximum(np.sqrt(w * yv / lam) - yv, 0.0)

    hi = float(np.max(np.where(yv > 0, w / np.where(yv > 0, yv, 1), 0.0)))
    lo = hi
    while spend(lo).sum() < X:
        lo /= 4
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if spend(mid).sum() > X:
            lo = mid
        else:
            hi = mid
    x = spend(0.5 * (lo + hi))
    return x * (X / x.sum())


def best_response_numeric(w, y, X, eps=0.0, rng=None, samples=2000, starts=4):
    """Best utility found by random simplex sampling plus multi-start SLSQP.

    Returns ``(x, utility)``.  The search knows nothing about the
    problem's structure beyond the objective and its constraints.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    w = np.asarray(w, float)
    n = w.shape[0]
    pts = X * rng.dirichlet(np.ones(n), size=samples)
    pts = np.vstack([pts, X * np.eye(n), np.full((1, n), X / n)])
    yv = np.asarray(y, float) + eps
    den = pts + yv
    vals = (w * np.divide(pts, den, out=np.zeros_like(pts), where=den > 0)).sum(axis=1)
    order = np.argsort(-vals)[:starts]
    best_x, best_u = pts[order[0]], float(vals[order[0]])
    cons = ({"type": "eq", "fun": lambda x: x.sum() - X, "jac": lambda x: np.ones_like(x)},)
    for k in order:
        res = minimize(
            lambda x: -br_utility(w, y, np.maximum(x, 0.0), eps), pts[k],
            method="SLSQP", bounds=[(0.0, X)] * n, constraints=cons,
            options={"ftol": 1e-14, "maxiter": 500},
        )
        x = np.clip(res.x, 0.0, None)
        x *= X / x.sum()
        u = br_utility(w, y, x, eps)
        if u > best_u:
            best_x, best_u = x, u
    return best_x, best_u


def brute_force_assignment(matrix):
    """Maximum-weight matching of rows into columns by full enumeration.

    Works in either orientation; returns ``(value, pairs)`` with pairs
    ``(row, col)``.
    """
    a = np.asarray(matrix, float)
    r, c = a.shape
    best, best_pairs = -np.inf, []
    if r <= c:
        for cols in itertools.permutations(range(c), r):
            v = sum(a[i, j] for i, j in enumerate(cols))
            if v > best:
                best, best_pairs = v, list(enumerate(cols))
    else:
        for rows in itertools.permutations(range(r), c):
            v = sum(a[i, j] for j, i in enumerate(rows))
            if v > best:
                best, best_pairs = v, [(i, j) for j, i in enumerate(rows)]
    return float(best), sorted(best_pairs)
