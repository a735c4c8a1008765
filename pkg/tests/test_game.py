import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from propshare.errors import DimensionError, ParameterError
from propshare.game import (
    GameConfig,
    bundle_utilities,
    compute_allocation,
    compute_prices,
    normalize_rows,
    user_utilities,
    utility_finite,
    utility_linear,
    validate_bids,
    validate_preferences,
    validate_strong_competitiveness,
)


def bid_matrices(max_m=5, max_n=5):
    return st.tuples(st.integers(1, max_m), st.integers(1, max_n)).flatmap(
        lambda s: arrays(float, s, elements=st.floats(0.01, 1.0))
    ).map(normalize_rows)


class TestGameConfig:
    def test_defaults(self):
        cfg = GameConfig(3, 4)
        assert cfg.budgets.tolist() == [1.0, 1.0, 1.0]
        assert not cfg.finite
        assert cfg.bound(1) == 4

    def test_bounds(self):
        cfg = GameConfig(2, 5, parallelism_bounds=[2, 5])
        assert cfg.finite and cfg.bound(0) == 2

    @pytest.mark.parametrize("kwargs", [
        dict(num_users=0, num_machines=2),
        dict(num_users=2, num_machines=0),
        dict(num_users=2, num_machines=2, budgets=[1.0, 0.0]),
        dict(num_users=2, num_machines=2, parallelism_bounds=[0, 1]),
        dict(num_users=2, num_machines=2, parallelism_bounds=[3, 1]),
        dict(num_users=2, num_machines=2, epsilon_reservation=-1e-3),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            GameConfig(**kwargs)


class TestValidation:
    def test_negative_weights(self):
        with pytest.raises(ParameterError):
            validate_preferences([[0.5, -0.1]])

    def test_normalized_flag(self):
        validate_preferences([[0.25, 0.75]], normalized=True)
        with pytest.raises(ParameterError):
            validate_preferences([[0.5, 0.6]], normalized=True)

    def test_bid_row_sum(self):
        cfg = GameConfig(1, 2)
        validate_bids([[0.4, 0.6]], cfg)
        with pytest.raises(ParameterError):
            validate_bids([[0.4, 0.5]], cfg)

    def test_bid_support_bound(self):
        cfg = GameConfig(1, 3, parallelism_bounds=[2])
        validate_bids([[0.5, 0.5, 0.0]], cfg)
        with pytest.raises(ParameterError):
            validate_bids([[0.3, 0.3, 0.4]], cfg)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            validate_bids([[0.5, 0.5]], GameConfig(1, 3))


class TestPricesAndAllocation:
    def test_prices_examples(self):
        assert compute_prices([[0.5, 0.5], [0.5, 0.5]]).tolist() == [1.0, 1.0]
        assert compute_prices(np.zeros((2, 3))).tolist() == [0.0, 0.0, 0.0]
        assert compute_prices([[1, 0], [0, 1], [0.5, 0.5]]).tolist() == [1.5, 1.5]

    def test_prices_ignore_eps(self):
        assert compute_prices([[1.0, 0.0]], eps=0.5).tolist() == [1.0, 0.0]

    def test_allocation_examples(self):
        assert compute_allocation([[1.0, 0.0]]).tolist() == [[1.0, 0.0]]
        r = compute_allocation([[0.5, 0.5], [0.5, 0.5]])
        assert r[0, 0] == r[1, 0] == 0.5
        assert compute_allocation([[1.0]], eps=1.0)[0, 0] == 0.5

    def test_unfunded_machine_unallocated(self):
        r = compute_allocation([[1.0, 0.0], [1.0, 0.0]])
        assert r[:, 1].tolist() == [0.0, 0.0]

    @given(bid_matrices())
    def test_partition_of_funded_machines(self, x):
        r = compute_allocation(x)
        cols = r.sum(axis=0)
        funded = x.sum(axis=0) > 0
        np.testing.assert_allclose(cols[funded], 1.0, atol=1e-12)
        assert np.all((r >= 0) & (r <= 1))

    @given(bid_matrices(), st.floats(0.01, 100))
    def test_degree_zero_homogeneous(self, x, c):
        np.testing.assert_allclose(compute_allocation(x * c), compute_allocation(x), atol=1e-12)


class TestUtilities:
    def test_linear_examples(self):
        assert utility_linear([0.5, 0.5], [1, 1]) == 1.0
        assert utility_linear([0.5, 0.5], [0.5, 0.5]) == 0.5
        assert utility_linear([0.8, 0.2], [0.25, 0.75]) == pytest.approx(0.35, abs=1e-15)

    def test_linear_length_mismatch(self):
        with pytest.raises(DimensionError):
            utility_linear([0.5, 0.5], [1.0])

    def test_finite_examples(self):
        w, r = [0.6, 0.3, 0.1], [0.5, 1.0, 1.0]
        assert utility_finite(w, r, 1) == pytest.approx(0.3, abs=1e-15)
        assert utility_finite(w, r, 2) == pytest.approx(0.6, abs=1e-15)
        assert utility_finite(w, r, 3) == utility_linear(w, r)

    @pytest.mark.parametrize("k", [0, 4])
    def test_finite_bad_k(self, k):
        with pytest.raises(ParameterError):
            utility_finite([0.6, 0.3, 0.1], [1, 1, 1], k)

    @given(arrays(float, 6, elements=st.floats(0, 1)), arrays(float, 6, elements=st.floats(0, 1)))
    def test_finite_at_n_equals_linear(self, w, r):
        assert utility_finite(w, r, 6) == pytest.approx(utility_linear(w, r), rel=1e-12, abs=1e-15)

    @given(bid_matrices())
    def test_full_ownership_gives_one(self, w):
        assert np.allclose(w @ np.ones(w.shape[1]), 1.0)
        assert np.allclose(user_utilities(w, np.ones_like(w)), 1.0)

    def test_bundle_utilities_diagonal(self, rng):
        w = normalize_rows(rng.random((4, 6)))
        r = compute_allocation(normalize_rows(rng.random((4, 6))))
        for bounds in (None, np.array([1, 2, 3, 6])):
            v = bundle_utilities(w, r, bounds)
            np.testing.assert_allclose(np.diag(v), user_utilities(w, r, bounds), rtol=1e-12)
            assert v[0, 2] == pytest.approx(utility_finite(w[0], r[2], 6 if bounds is None else 1))


class TestStrongCompetitiveness:
    def test_examples(self):
        assert validate_strong_competitiveness([[1, 0], [1, 0]]) == [1]
        assert validate_strong_competitiveness([[0.5, 0.5], [0.5, 0.5]]) == []
        assert validate_strong_competitiveness([[1, 0], [0, 1]]) == [0, 1]
