"""Random preference models.

Every generator draws from its own PCG64 stream derived from
``SeedSequence(seed, spawn_key=(purpose, m, n, ...))`` so that the same
(seed, m) always yields the same game regardless of what else a sweep runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .game import normalize_rows

_UNIFORM = 1
_CORRELATED = 2
MODELS = ("uniform", "correlated")


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _check_size(m, n):
    if m < 1 or n < 1:
        raise ParameterError(f"need m, n >= 1, got m={m}, n={n}")


def generate_uniform_preferences(m: int, n: int, seed: int) -> np.ndarray:
    """i.i.d. U(0,1) weights, each row normalized to sum 1."""
    _check_size(m, n)
    rng = stream(seed, _UNIFORM, m, n)
    return normalize_rows(rng.random((m, n)))


def generate_correlated_preferences(m: int, n: int, profile_dims: int, seed: int) -> np.ndarray:
    """Dot products of U(0,1) user and machine resource profiles, rows normalized."""
    _check_size(m, n)
    if profile_dims < 1:
        raise ParameterError("profile_dims must be >= 1")
    rng = stream(seed, _CORRELATED, m, n, profile_dims)
    users = rng.random((m, profile_dims))
    machines = rng.random((n, profile_dims))
    return normalize_rows(users @ machines.T)


@dataclass(frozen=True)
class PreferenceModel:
    kind: str = "uniform"
    profile_dims: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ParameterError(f"preference model must be one of {MODELS}, got {self.kind!r}")
        if self.profile_dims < 1:
            raise ParameterError("profile_dims must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def generate(self, m: int, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return generate_uniform_preferences(m, n, self.seed)
        return generate_correlated_preferences(m, n, self.profile_dims, self.seed)
