import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve, linear_sum_assignment

from propshare import _backend
from propshare.dynamics import check_equilibrium
from propshare.errors import ParameterError
from propshare.game import compute_allocation, compute_prices, user_utilities
from propshare.metrics import envy_ratio
from propshare.optimum import (
    ALPHA_THRESHOLD,
    max_weight_assignment,
    opposite_cubic_coefficient,
    opposite_cubic_roots,
    opposite_weight_game,
    optimum_allocation,
    slot_matrix,
    social_optimum_finite,
    social_optimum_infinite,
    symmetric_opposite_efficiency,
    two_player_equal_weight_equilibrium,
    two_player_opposite_equilibria,
    utility_floor_bid,
    worst_case_instance,
)
from propshare.oracles import brute_force_assignment

GRID = np.arange(1, 100) / 100
# alpha = 0.99 asymmetric equilibrium, confirmed by fsolve on the raw first-order conditions
ASYM_099 = (0.9999957030684592, 0.9595875398031531)


class TestInfiniteOptimum:
    def test_examples(self):
        assert social_optimum_infinite([[0.5, 0.5], [0.5, 0.5]])[0] == 1.0
        assert social_optimum_infinite(opposite_weight_game(0.7))[0] == pytest.approx(1.4, abs=1e-15)
        value, owner = social_optimum_infinite([[1, 0], [0, 1]])
        assert value == 2 and owner.tolist() == [0, 1]

    def test_ties_to_lowest_index(self):
        assert social_optimum_infinite([[0.5, 0.5], [0.5, 0.5]])[1].tolist() == [0, 0]

    def test_allocation_has_efficiency_one(self, rng):
        w = rng.dirichlet(np.ones(5), size=4)
        r = optimum_allocation(w)
        assert user_utilities(w, r).sum() == pytest.approx(social_optimum_infinite(w)[0], abs=1e-15)


class TestFiniteOptimum:
    def test_identity(self, backend):
        m = social_optimum_finite([[1, 0], [0, 1]], [2, 2])
        assert m.value == 2
        assert {(i, j) for i, _, j in m.pairs} == {(0, 0), (1, 1)}

    def test_three_by_two(self, backend):
        w = np.array([[0.9, 0.1], [0.8, 0.7], [0.2, 0.3]])
        m = social_optimum_finite(w, 1)
        want, _ = brute_force_assignment(w)
        assert m.value == pytest.approx(want, abs=1e-15) and m.value == pytest.approx(1.6, abs=1e-15)
        assert sorted((i, j) for i, _, j in m.pairs) == [(0, 0), (1, 1)]

    def test_equal_weights(self, backend):
        assert social_optimum_finite(np.full((4, 4), 0.25), 1).value == 1.0

    def test_bounds_validated(self):
        with pytest.raises(ParameterError):
            social_optimum_finite([[1.0]], 0)

    def test_slots_capped_at_n(self):
        slots, owners = slot_matrix(np.ones((2, 3)) / 3, [5, 1])
        assert owners.tolist() == [0, 0, 0, 1]

    def test_at_least_infinite_when_many_users(self, backend, rng):
        for _ in range(20):
            w = rng.dirichlet(np.ones(3), size=5)
            assert social_optimum_finite(w, 3).value <= social_optimum_infinite(w)[0] + 1e-12
        # distinct argmax users: the matching reaches the infinite optimum
        w = np.eye(3) * 0.8 + 0.1
        assert social_optimum_finite(w, 3).value == pytest.approx(social_optimum_infinite(w)[0])

    @settings(max_examples=150, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.data())
    def test_hungarian_exact(self, r, c, data):
        ints = data.draw(st.lists(st.integers(0, 255), min_size=r * c, max_size=r * c))
        a = np.array(ints, float).reshape(r, c) / 32
        want, _ = brute_force_assignment(a)
        for name in _backend.available():
            prev = _backend.set_backend(name)
            try:
                pairs = max_weight_assignment(a)
            finally:
                _backend.set_backend(prev)
            assert len(pairs) == min(r, c)
            assert len({i for i, _ in pairs}) == len({j for _, j in pairs}) == len(pairs)
            assert sum(a[i, j] for i, j in pairs) == want

    def test_against_scipy(self, backend, rng):
        for _ in range(30):
            a = rng.random((int(rng.integers(1, 30)), int(rng.integers(1, 30))))
            rows, cols = linear_sum_assignment(a, maximize=True)
            got = sum(a[i, j] for i, j in max_weight_assignment(a))
            assert got == pytest.approx(a[rows, cols].sum(), rel=1e-12)


class TestTwoPlayer:
    @pytest.mark.parametrize("alpha", [0.5, 0.9, 0.25])
    def test_equal_weight(self, alpha):
        eq = two_player_equal_weight_equilibrium(alpha)
        assert eq.x == eq.y == alpha
        assert eq.delta == pytest.approx(1 / alpha - 1, abs=1e-12)
        assert eq.utilities == pytest.approx((0.5, 0.5), abs=1e-15)
        w = np.array([[alpha, 1 - alpha]] * 2)
        assert check_equilibrium(eq.bids(), w).kkt_residual < 1e-10

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ParameterError):
            two_player_opposite_equilibria(alpha)
        with pytest.raises(ParameterError):
            two_player_equal_weight_equilibrium(alpha)

    def test_cubic_factorization(self):
        for a in GRID:
            c = opposite_cubic_coefficient(a)
            expanded = np.polymul([1, -1], [1, -(c - 1), 1])
            np.testing.assert_allclose(expanded, [1, -c, c, -1], atol=1e-12)

    def test_roots_solve_cubic(self):
        for a in GRID:
            c = opposite_cubic_coefficient(a)
            roots, _ = opposite_cubic_roots(a)
            assert 1.0 in roots
            for d in roots:
                assert abs(d**3 - c * d**2 + c * d - 1) < 1e-10

    def test_minimum_efficiency(self):
        sym = [e for e in two_player_opposite_equilibria(math.sqrt(2) / 2) if e.delta == 1.0][0]
        assert sym.efficiency == pytest.approx(2 * math.sqrt(2) - 2, abs=1e-12)

    def test_threshold(self):
        assert ALPHA_THRESHOLD == pytest.approx((2 + math.sqrt(2)) / 4, abs=1e-15)
        eqs = two_player_opposite_equilibria(ALPHA_THRESHOLD)
        assert [e.kind for e in eqs] == ["threshold"]
        assert eqs[0].delta == 1.0
        # just past the threshold the asymmetric pair appears close to delta = 1
        kinds = [e.kind for e in two_player_opposite_equilibria(0.854)]
        assert kinds == ["symmetric", "asymmetric", "asymmetric"]
        assert [e.kind for e in two_player_opposite_equilibria(0.85)] == ["symmetric"]

    def test_alpha_099(self):
        eqs = two_player_opposite_equilibria(0.99)
        asym = [e for e in eqs if e.kind == "asymmetric"]
        assert len(asym) == 2
        x, y = asym[0].x, asym[0].y
        assert (x, y) == pytest.approx(ASYM_099, abs=1e-12)
        for e in asym:
            assert 0.75 < e.efficiency < 0.76

    def test_alpha_099_independent(self):
        a = 0.99

        def foc(v):
            x, y = v
            s, t = x + y, 2 - x - y
            return [a * y / s**2 - (1 - a) * (1 - y) / t**2, (1 - a) * x / s**2 - a * (1 - x) / t**2]

        sol = fsolve(foc, [0.999, 0.95], xtol=1e-12)
        assert tuple(sol) == pytest.approx(ASYM_099, abs=1e-9)

    def test_grid_properties(self):
        for a in GRID:
            w = opposite_weight_game(a)
            for e in two_player_opposite_equilibria(a):
                assert e.foc_residual < 1e-8
                assert e.efficiency >= 0.75
                r = compute_allocation(e.bids())
                assert envy_ratio(w, r) >= 1 - 1e-9
                if e.delta == 1.0 and a >= 0.5:
                    assert e.efficiency == pytest.approx(2 * a + 1 / a - 2, abs=1e-12)
            assert symmetric_opposite_efficiency(a) >= 2 * math.sqrt(2) - 2 - 1e-12


class TestWorstCase:
    def test_n3(self):
        wc = worst_case_instance(3)
        assert wc.config.num_users == 12
        assert social_optimum_infinite(wc.weights)[0] == pytest.approx(3, abs=1e-8)
        assert compute_prices(wc.bids).tolist() == [4.0, 4.0, 4.0]
        welfare = user_utilities(wc.weights, compute_allocation(wc.bids)).sum()
        assert welfare == pytest.approx(2 * 3 / 4, abs=1e-8)
        assert check_equilibrium(wc.bids, wc.weights).kkt_residual < 1e-6

    @pytest.mark.parametrize("n", range(2, 8))
    def test_family(self, n):
        wc = worst_case_instance(n)
        np.testing.assert_allclose(wc.weights.sum(axis=1), 1.0, atol=1e-12)
        welfare = user_utilities(wc.weights, compute_allocation(wc.bids)).sum()
        assert welfare < 2
        assert welfare / social_optimum_infinite(wc.weights)[0] <= 2 / n

    @pytest.mark.parametrize("n", [1, 0, 2.5])
    def test_bad_n(self, n):
        with pytest.raises(ParameterError):
            worst_case_instance(n)


class TestUtilityFloor:
    def test_examples(self):
        assert utility_floor_bid([0.3, 0.7]).tolist() == [0.3, 0.7]
        np.testing.assert_allclose(utility_floor_bid(np.ones(4)), 0.25)

    def test_share_is_one_over_m(self, rng):
        for m in (2, 5, 13):
            others = rng.dirichlet(np.ones(4), size=m - 1)
            x = utility_floor_bid(others.sum(axis=0))
            r = x / (x + others.sum(axis=0))
            np.testing.assert_allclose(r, 1 / m, atol=1e-12)
            w = rng.dirichlet(np.ones(4))
            assert w @ r == pytest.approx(1 / m, abs=1e-12)

    def test_zero_prices(self):
        with pytest.raises(ParameterError):
            utility_floor_bid([0.0, 0.0])
