import warnings

import numpy as np
import pytest

from propshare.dynamics import (
    ConvergenceCriterion,
    check_equilibrium,
    init_bids_weight_proportional,
    run_dynamics,
    stabilization_iteration,
)
from propshare.errors import ParameterError, StrategyError
from propshare.game import GameConfig
from propshare.optimum import equal_weight_game, worst_case_instance
from propshare.preferences import generate_uniform_preferences
from propshare.strategies import GreedyParams, best_response_infinite, response_utility


class TestCriterion:
    @pytest.mark.parametrize("kw", [dict(kind="nope"), dict(tol=0.0), dict(max_iterations=0)])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            ConvergenceCriterion(**kw)


class TestInit:
    def test_examples(self):
        x = init_bids_weight_proportional([[0.5, 0.5], [0.8, 0.2], [0.0, 0.0]])
        np.testing.assert_allclose(x, [[0.5, 0.5], [0.8, 0.2], [0.5, 0.5]])

    def test_budgets(self):
        x = init_bids_weight_proportional([[0.25, 0.75]], budgets=[2.0])
        assert x.tolist() == [[0.5, 1.5]]

    def test_bounded_keeps_top_k(self):
        x = init_bids_weight_proportional([[0.1, 0.5, 0.4]], bounds=[2])
        np.testing.assert_allclose(x, [[0.0, 5 / 9, 4 / 9]])


class TestEquilibriumCheck:
    def test_equal_weight_equilibrium(self):
        w = equal_weight_game(0.5)
        assert check_equilibrium([[0.5, 0.5], [0.5, 0.5]], w).kkt_residual < 1e-10

    def test_worst_case(self):
        wc = worst_case_instance(3)
        assert check_equilibrium(wc.bids, wc.weights).kkt_residual < 1e-6

    def test_non_equilibrium(self):
        w = np.array([[0.5, 0.5], [0.5, 0.5]])
        cert = check_equilibrium([[1.0, 0.0], [1.0, 0.0]], w, eps=1e-9)
        assert cert.kkt_residual > 0.01
        assert (0, 1) in cert.violations


class TestStabilization:
    def test_suffix_rule(self):
        assert stabilization_iteration([0.5, 1e-4, 0.2, 1e-4, 1e-5], 1e-3) == 4
        assert stabilization_iteration([1e-4, 1e-4], 1e-3) == 1
        assert stabilization_iteration([0.5, 0.5], 1e-3) is None
        assert stabilization_iteration([0.5, 0.5], 1e-3, converged=True) == 2
        assert stabilization_iteration([], 1e-3) is None


class TestRun:
    def test_equal_weight_two_player(self):
        w = equal_weight_game(0.6)
        tr = run_dynamics(GameConfig(2, 2), w, "br")
        assert tr.converged and tr.iterations <= 5
        np.testing.assert_allclose(tr.final_bids[:, 0], [0.6, 0.6], atol=1e-6)
        np.testing.assert_allclose(tr.final.utilities, [0.5, 0.5], atol=1e-6)

    def test_single_user(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tr = run_dynamics(GameConfig(1, 3), [[0.2, 0.3, 0.5]], "br")
        assert tr.converged and tr.iterations == 1

    def test_m40_efficiency(self):
        w = generate_uniform_preferences(40, 100, 0)
        tr = run_dynamics(GameConfig(40, 100), w, "br", keep_bids=False)
        assert tr.converged
        assert tr.final.efficiency == pytest.approx(0.9, abs=0.05)
        assert tr.final.efficiency <= 1 + 1e-9

    def test_tight_convergence_is_equilibrium(self):
        w = generate_uniform_preferences(10, 12, 3)
        tr = run_dynamics(GameConfig(10, 12), w, "br", ConvergenceCriterion("utility", 1e-9, 500))
        assert tr.converged
        assert check_equilibrium(tr.final_bids, w).kkt_residual < 1e-6
        assert tr.final.utilities.min() >= 1 / 10 - 1e-6

    def test_trace_invariants(self):
        w = generate_uniform_preferences(8, 10, 1)
        crit = ConvergenceCriterion("utility", 1e-3, 50)
        tr = run_dynamics(GameConfig(8, 10), w, "br", crit)
        assert len(tr.snapshots) <= crit.max_iterations + 1
        if tr.converged:
            assert np.max(np.abs(tr.snapshots[-1].utilities - tr.snapshots[-2].utilities)) < crit.tol
            if tr.stabilization_iteration is not None:
                assert tr.stabilization_iteration <= tr.iterations

    def test_br_update_never_lowers_own_utility(self):
        w = generate_uniform_preferences(6, 8, 2)
        seen = []

        def update(i, row, y, wi, X, eps):
            new = best_response_infinite(wi, y, X, eps)
            seen.append(response_utility(wi, new, y, eps) - response_utility(wi, row, y, eps))
            return new

        run_dynamics(GameConfig(6, 8), w, update, ConvergenceCriterion(max_iterations=10))
        assert min(seen) >= -1e-12

    def test_deterministic(self):
        w = generate_uniform_preferences(12, 20, 9)
        a = run_dynamics(GameConfig(12, 20), w, "greedy", ConvergenceCriterion("marginal", 1e-3, 30))
        b = run_dynamics(GameConfig(12, 20), w, "greedy", ConvergenceCriterion("marginal", 1e-3, 30))
        for s, t in zip(a.snapshots, b.snapshots):
            assert s.bids.tobytes() == t.bids.tobytes()
            assert s.welfare == t.welfare

    def test_greedy_budgets_and_support(self):
        w = generate_uniform_preferences(5, 10, 4)
        cfg = GameConfig(5, 10, parallelism_bounds=[3] * 5)
        tr = run_dynamics(cfg, w, "greedy", ConvergenceCriterion("marginal", 1e-3, 20), greedy=GreedyParams())
        np.testing.assert_allclose(tr.final_bids.sum(axis=1), 1.0, atol=1e-9)
        assert (np.count_nonzero(tr.final_bids, axis=1) <= 3).all()

    def test_local_search_respects_bound(self):
        w = generate_uniform_preferences(10, 20, 5)
        cfg = GameConfig(10, 20, parallelism_bounds=[4] * 10)
        tr = run_dynamics(cfg, w, "ls", ConvergenceCriterion(max_iterations=10))
        assert (np.count_nonzero(tr.final_bids, axis=1) <= 4).all()

    def test_br_rejects_bounds(self):
        cfg = GameConfig(2, 2, parallelism_bounds=[1, 1])
        with pytest.raises(ParameterError):
            run_dynamics(cfg, equal_weight_game(0.5), "br")

    def test_weak_competition_warns(self):
        with pytest.warns(UserWarning, match="strongly competitive"):
            run_dynamics(GameConfig(2, 2), [[1.0, 0.0], [1.0, 0.0]], "br",
                         ConvergenceCriterion(max_iterations=3))

    def test_strategy_failure_reports_user(self):
        def boom(i, row, y, w, X, eps):
            if i == 1:
                raise ParameterError("bad update")
            return row

        with pytest.raises(StrategyError) as info:
            run_dynamics(GameConfig(2, 2), equal_weight_game(0.5), boom)
        assert info.value.user == 1

    def test_unbounded_marginal_without_eps(self):
        with pytest.raises(StrategyError) as info:
            run_dynamics(GameConfig(2, 2), [[0.5, 0.5], [0.5, 0.5]], "br",
                         initial_bids=[[1.0, 0.0], [1.0, 0.0]], eps=0.0)
        assert "machine 1" in str(info.value)

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            run_dynamics(GameConfig(2, 3), equal_weight_game(0.5))
