"""Executable acceptance checks.

Each ``check_*`` function runs one end-to-end property of the library,
returns a :class:`CheckResult` and never raises on a failed property.
"""
from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass
from pathlib import Path
import tempfile

import numpy as np

from .dynamics import ConvergenceCriterion, check_equilibrium, run_dynamics
from .experiments import ScenarioConfig, emit_csv, run_sweep
from .game import (
    GameConfig,
    compute_allocation,
    compute_prices,
    normalize_rows,
    user_utilities,
)
from .metrics import evaluate
from .optimum import (
    equal_weight_game,
    max_weight_assignment,
    optimum_value,
    social_optimum_finite,
    slot_matrix,
    symmetric_opposite_efficiency,
    two_player_opposite_equilibria,
    utility_floor_bid,
    worst_case_instance,
)
from .oracles import best_response_dual, best_response_numeric, br_utility, brute_force_assignment
from .preferences import stream
from .strategies import best_response_infinite, user_kkt_residual

SWEEP_M = (5, 10, 20, 40, 80, 150)
SWEEP_SEEDS = tuple(range(10))
_VALIDATION_STREAM = 7


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(name, budget, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if budget is not None and dt >= budget:
        ok = False
        detail += f"; runtime {dt:.1f}s exceeds {budget}s"
    return CheckResult(name, bool(ok), detail, dt)


# 1 ---------------------------------------------------------------------------

def check_two_player_analytic(grid_points: int = 99) -> CheckResult:
    def run():
        alphas = np.arange(1, grid_points + 1) / (grid_points + 1)
        worst_bid = worst_eff = 0.0
        effs = []
        crit = ConvergenceCriterion("utility", 1e-12, 50)
        for a in alphas:
            w = equal_weight_game(a)
            tr = run_dynamics(GameConfig(2, 2), w, "br", crit, eps=0.0, keep_bids=False)
            x = tr.final_bids[:, 0]
            worst_bid = max(worst_bid, float(np.max(np.abs(x - a))) if tr.converged else math.inf)
            sym = [e for e in two_player_opposite_equilibria(a) if e.kind != "asymmetric" and abs(e.delta - 1) < 1e-12]
            eff = sym[0].efficiency
            effs.append(eff)
            worst_eff = max(worst_eff, abs(eff - symmetric_opposite_efficiency(a)))
        floor = 2 * math.sqrt(2) - 2
        lowest = min(effs)
        ok = worst_bid <= 1e-6 and worst_eff <= 1e-9 and lowest >= floor - 1e-9
        return ok, (f"{grid_points} alphas: max |x-alpha| {worst_bid:.1e}, "
                    f"max efficiency error {worst_eff:.1e}, min efficiency {lowest:.6f} (floor {floor:.6f})")
    return _timed("two-player analytic", 1.0, run)


# 2 ---------------------------------------------------------------------------

def check_two_player_bounds(games: int = 500, seed: int = 0, max_attempts: int = 2000) -> CheckResult:
    """Collect ``games`` converged two-player equilibria and test the bounds.

    Sequential best response can cycle on small games; cycling runs are
    counted and skipped since the bounds concern equilibria only.
    """
    def run():
        rng = stream(seed, _VALIDATION_STREAM, 2)
        crit = ConvergenceCriterion("utility", 1e-10, 200)
        low_pi = low_tau = low_rho = math.inf
        converged = attempts = 0
        while converged < games and attempts < max_attempts:
            attempts += 1
            n = int(rng.integers(1, 6))
            w = normalize_rows(rng.random((2, n)) + 1e-3)
            tr = run_dynamics(GameConfig(2, n), w, "br", crit, keep_bids=False)
            if not tr.converged:
                continue
            converged += 1
            f = tr.final
            low_pi, low_tau, low_rho = min(low_pi, f.efficiency), min(low_tau, f.uniformity), min(low_rho, f.envy_raw)
        ok = converged >= games and low_pi >= 0.75 - 1e-6 and low_tau >= 0.5 - 1e-6 and low_rho >= 1 - 1e-9
        return ok, (f"{converged} equilibria ({attempts - converged} cycling runs skipped): "
                    f"min efficiency {low_pi:.4f}, min uniformity {low_tau:.4f}, min raw envy ratio {low_rho:.6f}")
    return _timed("two-player bounds", 10.0, run)


# 3 ---------------------------------------------------------------------------

def check_best_response(instances: int = 1000, seed: int = 0) -> CheckResult:
    def run():
        rng = stream(seed, _VALIDATION_STREAM, 3)
        worst_gap = worst_kkt = worst_dual = 0.0
        for _ in range(instances):
            n = int(rng.integers(1, 5))
            w = rng.dirichlet(np.ones(n))
            y = rng.uniform(0.01, 3.0, n)
            X = float(rng.uniform(0.2, 2.0))
            x = best_response_infinite(w, y, X)
            u = br_utility(w, y, x)
            _, u_num = best_response_numeric(w, y, X, rng=rng, samples=400, starts=2)
            worst_gap = max(worst_gap, u_num - u)
            worst_kkt = max(worst_kkt, user_kkt_residual(w, x, y))
            worst_dual = max(worst_dual, float(np.max(np.abs(x - best_response_dual(w, y, X)))))
        ok = worst_gap <= 1e-6 and worst_kkt < 1e-7 and worst_dual < 1e-7
        return ok, (f"{instances} instances: oracle utility excess {worst_gap:.1e}, "
                    f"KKT residual {worst_kkt:.1e}, distance to dual solution {worst_dual:.1e}")
    return _timed("best response", 30.0, run)


# 4 ---------------------------------------------------------------------------

def check_hungarian(instances: int = 200, seed: int = 0) -> CheckResult:
    def run():
        rng = stream(seed, _VALIDATION_STREAM, 4)
        mismatches = 0
        for t in range(instances):
            if t % 2 == 0:
                r, c = (int(v) for v in rng.integers(1, 7, 2))
                a = rng.integers(0, 256, (r, c)) / 64.0
                got = sum(a[i, j] for i, j in max_weight_assignment(a))
                want = brute_force_assignment(a)[0]
            else:
                m, n = int(rng.integers(1, 4)), int(rng.integers(1, 7))
                w = rng.integers(1, 256, (m, n)) / 64.0
                bounds = rng.integers(1, n + 1, m)
                slots = slot_matrix(w, bounds)[0]
                while slots.shape[0] > 6:
                    bounds = np.maximum(bounds - 1, 1)
                    slots = slot_matrix(w, bounds)[0]
                got = social_optimum_finite(w, bounds).value
                want = brute_force_assignment(slots)[0]
            mismatches += got != want
        return mismatches == 0, f"{instances} instances up to 6x6, {mismatches} disagree with enumeration"
    return _timed("hungarian", 5.0, run)


# 5, 10 -------------------------------------------------------------------------

def reference_sweep(seeds=SWEEP_SEEDS, m_values=SWEEP_M, n=100):
    return run_sweep(ScenarioConfig(n=n, strategy="br", max_iters=200), m_values, seeds)


def check_full_scale(seeds=SWEEP_SEEDS, m_values=SWEEP_M) -> CheckResult:
    def run():
        res = reference_sweep(seeds, m_values)
        it, pi = res.aggregate("iters"), res.aggregate("efficiency")
        tau, rho = res.aggregate("uniformity"), res.aggregate("envy")
        bad = [m for m in res.m_values()
               if not (it[m] <= 5 and pi[m] >= 0.85 and tau[m] >= 0.60 and rho[m] >= 0.92)]
        errors = [r for r in res.rows if r.error]
        parts = [f"m={m}: it {it[m]:.1f} eff {pi[m]:.3f} unif {tau[m]:.3f} envy {rho[m]:.3f}" for m in res.m_values()]
        return not bad and not errors, "; ".join(parts)
    return _timed("full-scale best response", 120.0, run)


def check_determinism(seeds=SWEEP_SEEDS, m_values=SWEEP_M) -> CheckResult:
    def run():
        blobs = []
        with tempfile.TemporaryDirectory() as tmp:
            for k in range(2):
                path = Path(tmp) / f"run{k}.csv"
                emit_csv(reference_sweep(seeds, m_values), path)
                blobs.append(path.read_bytes())
        same = blobs[0] == blobs[1]
        return same, f"two sweeps of {len(seeds) * len(m_values)} scenarios: CSV {'identical' if same else 'differs'} ({len(blobs[0])} bytes)"
    return _timed("determinism", None, run)


# 6 ---------------------------------------------------------------------------

def check_greedy(seeds=SWEEP_SEEDS, m_values=SWEEP_M, stabilization_limit: int = 100) -> CheckResult:
    def run():
        res = run_sweep(ScenarioConfig(strategy="greedy", criterion="marginal", max_iters=500), m_values, seeds)
        big = [m for m in res.m_values() if m >= 60]
        small = [m for m in res.m_values() if m < 60]
        conv_ok = all(r.converged and r.iters <= 200 for m in big for r in res.by_m(m))
        stab = res.aggregate("stab_iters")
        stab_ok = all(stab[m] <= stabilization_limit for m in big)
        flagged = sum(not r.converged for m in small for r in res.by_m(m))
        iters = res.aggregate("iters")
        worst_iters = {m: max(r.iters for r in res.by_m(m)) for m in big}
        parts = [f"m={m}: converged {sum(r.converged for r in res.by_m(m))}/{len(res.by_m(m))}, "
                 f"max iters {worst_iters[m]}, mean stabilization {stab[m]:.1f}" for m in big]
        parts.append(f"m<60 non-converged at 500: {flagged}/{sum(len(res.by_m(m)) for m in small)}")
        del iters
        return bool(big) and conv_ok and stab_ok, "; ".join(parts)
    return _timed("greedy stabilization", None, run)


# 7 ---------------------------------------------------------------------------

def check_finite_parallelism(wide_seeds=tuple(range(5)), wide_m=(40, 80, 150),
                             narrow_seeds=tuple(range(3)), narrow_m=(20, 30, 40)) -> CheckResult:
    def run():
        inf = run_sweep(ScenarioConfig(strategy="br"), wide_m, wide_seeds)
        fin = run_sweep(ScenarioConfig(strategy="ls", delta=20), wide_m, wide_seeds)
        parts, ok = [], True
        for m in wide_m:
            conv = all(r.converged for r in fin.by_m(m))
            dpi = abs(fin.aggregate("efficiency")[m] - inf.aggregate("efficiency")[m])
            drho = abs(fin.aggregate("envy")[m] - inf.aggregate("envy")[m])
            ok &= conv and dpi <= 0.05 and drho <= 0.05
            parts.append(f"delta=20 m={m}: converged {conv}, |d eff| {dpi:.3f}, |d envy| {drho:.3f}")
        narrow = run_sweep(ScenarioConfig(strategy="ls", delta=5), narrow_m, narrow_seeds)
        for m in narrow_m:
            rows = narrow.by_m(m)
            flagged = all(not r.converged for r in rows)
            early = min(r.efficiency_series[10] for r in rows)
            ok &= flagged and early >= 0.7
            parts.append(f"delta=5 m={m}: non-converged {flagged}, min efficiency at iteration 10 {early:.3f}")
        return ok, "; ".join(parts)
    return _timed("finite parallelism", None, run)


# 8 ---------------------------------------------------------------------------

def check_worst_case(ns=range(2, 7)) -> CheckResult:
    def run():
        parts, ok = [], True
        for n in ns:
            wc = worst_case_instance(n)
            cert = check_equilibrium(wc.bids, wc.weights)
            totals = compute_prices(wc.bids)
            alloc = compute_allocation(wc.bids)
            welfare = float(user_utilities(wc.weights, alloc).sum())
            eff = welfare / optimum_value(wc.weights)
            good = (cert.kkt_residual < 1e-6 and np.allclose(totals, n + 1, rtol=0, atol=1e-12)
                    and welfare < 2 and eff <= 2 / n)
            ok &= good
            parts.append(f"n={n}: residual {cert.kkt_residual:.1e}, welfare {welfare:.4f}, eff {eff:.4f}")
        return ok, "; ".join(parts)
    return _timed("worst case", None, run)


# 9 ---------------------------------------------------------------------------

def check_utility_floor(games: int = 200, seed: int = 0) -> CheckResult:
    def run():
        rng = stream(seed, _VALIDATION_STREAM, 9)
        floor_err = 0.0
        slack = math.inf
        crit = ConvergenceCriterion("utility", 1e-10, 500)
        converged = 0
        for _ in range(games):
            m, n = int(rng.integers(2, 21)), int(rng.integers(1, 9))
            w = normalize_rows(rng.random((m, n)) + 1e-3)
            others = normalize_rows(rng.random((m - 1, n)) + 1e-3)
            i = int(rng.integers(m))
            x = utility_floor_bid(others.sum(axis=0))
            bids = np.insert(others, i, x, axis=0)
            u = user_utilities(w, compute_allocation(bids))[i]
            floor_err = max(floor_err, abs(u - 1 / m))
            tr = run_dynamics(GameConfig(m, n), w, "br", crit, keep_bids=False)
            if tr.converged:
                converged += 1
                slack = min(slack, float(tr.final.utilities.min()) - 1 / m)
        ok = floor_err <= 1e-9 and converged > 0 and slack >= -1e-6
        return ok, (f"{games} games: max |U-1/m| {floor_err:.1e}; {converged} converged, "
                    f"min (utility - 1/m) {slack:.2e}")
    return _timed("utility floor", None, run)


ALL_CHECKS = (
    ("1", check_two_player_analytic),
    ("2", check_two_player_bounds),
    ("3", check_best_response),
    ("4", check_hungarian),
    ("5", check_full_scale),
    ("6", check_greedy),
    ("7", check_finite_parallelism),
    ("8", check_worst_case),
    ("9", check_utility_floor),
    ("10", check_determinism),
)


def run_all(selected=None, out=None):
    """Run the checks whose keys are in ``selected`` (all by default)."""
    results = []
    for key, fn in ALL_CHECKS:
        if selected and key not in selected:
            continue
        res = fn()
        if out is not None:
            print(f"{key:>2} {res.line()}", file=out, flush=True)
        results.append(res)
    return results
