import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from propshare.errors import ParameterError
from propshare.game import compute_allocation
from propshare.metrics import efficiency, envy_freeness, envy_ratio, evaluate, utility_uniformity
from propshare.optimum import (
    opposite_weight_game,
    optimum_allocation,
    optimum_value,
    two_player_opposite_equilibria,
    worst_case_instance,
)


def test_efficiency_of_optimum(rng):
    w = rng.dirichlet(np.ones(6), size=4)
    for bounds in (None, np.array([1, 2, 2, 6])):
        opt = optimum_value(w, bounds)
        assert efficiency(optimum_allocation(w, bounds), w, bounds, opt) == pytest.approx(1.0, abs=1e-15)


def test_efficiency_minimum_two_player():
    a = math.sqrt(2) / 2
    sym = [e for e in two_player_opposite_equilibria(a) if e.delta == 1.0][0]
    w = opposite_weight_game(a)
    eff = efficiency(compute_allocation(sym.bids()), w, None, optimum_value(w))
    assert eff == pytest.approx(2 * math.sqrt(2) - 2, abs=1e-12)


def test_efficiency_worst_case():
    wc = worst_case_instance(3)
    eff = efficiency(compute_allocation(wc.bids), wc.weights, None, optimum_value(wc.weights))
    assert eff == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("opt", [0.0, -1.0, None])
def test_efficiency_bad_optimum(opt):
    with pytest.raises(ParameterError):
        efficiency(np.eye(2), np.eye(2), None, opt)


def test_uniformity_examples():
    assert utility_uniformity([0.3, 0.3, 0.3]) == 1.0
    assert utility_uniformity([0.5, 1.0]) == 0.5
    assert utility_uniformity([0.0, 0.0]) == 0.0


def test_optimum_leaves_users_empty():
    w = np.array([[0.6, 0.4], [0.7, 0.3], [0.5, 0.5]])
    rep = evaluate(w, optimum_allocation(w), None, optimum_value(w))
    assert rep.uniformity == 0.0


@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=8), st.floats(0.1, 10))
def test_uniformity_scale_invariant(u, c):
    assert utility_uniformity(np.array(u) * c) == pytest.approx(utility_uniformity(u), rel=1e-12)


def test_envy_examples():
    w = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert envy_freeness(w, compute_allocation([[0.5, 0.5], [0.5, 0.5]])) == 1.0
    # user 0 owns nothing, user 1 owns everything user 0 wants
    r = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert envy_freeness(w, r) == 0.0


def test_envy_skips_worthless_bundles():
    w = np.array([[1.0, 0.0], [0.0, 1.0]])
    r = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert envy_ratio(w, r) == math.inf
    assert envy_freeness(w, r) == 1.0


def test_envy_uses_envier_bound():
    w = np.array([[0.5, 0.3, 0.2], [0.2, 0.3, 0.5]])
    r = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
    # with k=1 user 0 values user 1's bundle at max(0.3, 0.2) = 0.3
    assert envy_ratio(w, r, np.array([1, 3])) == pytest.approx(0.5 / 0.3)
    assert envy_ratio(w, r) == pytest.approx(0.5 / 0.5)


def test_report_fields(rng):
    w = rng.dirichlet(np.ones(5), size=3)
    r = compute_allocation(rng.dirichlet(np.ones(5), size=3))
    rep = evaluate(w, r, None, optimum_value(w))
    assert rep.welfare == pytest.approx(rep.utilities.sum())
    assert rep.efficiency == pytest.approx(rep.welfare / optimum_value(w), rel=1e-12)
    assert rep.envy == min(1.0, rep.envy_raw)
    assert 0 <= rep.uniformity <= 1
