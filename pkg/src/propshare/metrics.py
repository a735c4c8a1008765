"""Efficiency and fairness of an allocation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .game import bundle_utilities, user_utilities


@dataclass(frozen=True)
class MetricsReport:
    welfare: float
    efficiency: float
    uniformity: float
    envy: float
    envy_raw: float
    utilities: np.ndarray


def efficiency(alloc, weights, bounds=None, optimum: float = None) -> float:
    """Welfare divided by the social optimum ``optimum``."""
    if optimum is None or not optimum > 0:
        raise ParameterError(f"social optimum must be positive, got {optimum}")
    return float(user_utilities(weights, alloc, bounds).sum()) / optimum


def utility_uniformity(utilities) -> float:
    """min/max of user utilities; 0 when every utility is 0."""
    u = np.asarray(utilities, dtype=float)
    top = u.max()
    if not top > 0:
        return 0.0
    return float(u.min() / top)


def envy_ratio(weights, alloc, bounds=None) -> float:
    """Unclamped ``min_{i != j} U_i(r_i) / U_i(r_j)``.

    Pairs where ``U_i(r_j) = 0`` cannot produce envy and are skipped; if
    every pair is skipped the result is ``inf``.
    """
    v = bundle_utilities(weights, alloc, bounds)
    m = v.shape[0]
    if m < 2:
        return float("inf")
    own = np.diag(v)[:, None]
    mask = (v > 0) & ~np.eye(m, dtype=bool)
    if not mask.any():
        return float("inf")
    ratios = np.divide(own, v, out=np.full_like(v, np.inf), where=mask)
    return float(ratios.min())


def envy_freeness(weights, alloc, bounds=None) -> float:
    """Envy ratio clamped to at most 1 (1 means envy-free)."""
    return min(1.0, envy_ratio(weights, alloc, bounds))


def evaluate(weights, alloc, bounds=None, optimum: float = None) -> MetricsReport:
    u = user_utilities(weights, alloc, bounds)
    welfare = float(u.sum())
    if optimum is None or not optimum > 0:
        raise ParameterError(f"social optimum must be positive, got {optimum}")
    raw = envy_ratio(weights, alloc, bounds)
    return MetricsReport(
        welfare=welfare,
        efficiency=welfare / optimum,
        uniformity=utility_uniformity(u),
        envy=min(1.0, raw),
        envy_raw=raw,
        utilities=u,
    )
