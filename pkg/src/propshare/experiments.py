"""Scenario runs, parameter sweeps and their CSV / plot-series output."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import ConvergenceCriterion, init_bids_weight_proportional, run_dynamics
from .errors import GameError, ParameterError
from .game import GameConfig, compute_allocation
from .metrics import evaluate
from .optimum import optimum_allocation, optimum_value
from .preferences import PreferenceModel
from .strategies import GreedyParams

log = logging.getLogger(__name__)

STRATEGIES = ("br", "ls", "greedy")
CSV_FIELDS = (
    "m", "seed", "strategy", "model", "delta", "converged", "iters", "stab_iters",
    "efficiency", "uniformity", "envy", "eff_opt", "eff_wprop",
    "unif_opt", "unif_wprop", "envy_opt", "envy_wprop",
)
SERIES_FIELDS = CSV_FIELDS[6:]


@dataclass(frozen=True)
class ScenarioConfig:
    m: int = 40
    n: int = 100
    model: str = "uniform"
    strategy: str = "br"
    delta: int | None = None
    criterion: str | None = None
    eps_conv: float = 1e-3
    max_iters: int = 200
    seed: int = 0
    replicates: int = 1
    profile_dims: int = 3
    greedy_step: float = 0.01

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.m < 1 or self.n < 1:
            raise ParameterError("m and n must be positive")
        if self.delta is not None and not 1 <= self.delta <= self.n:
            raise ParameterError(f"delta must lie in [1, {self.n}]")
        if self.strategy == "br" and self.delta is not None:
            raise ParameterError("strategy 'br' is for infinite parallelism; use 'ls' with delta")
        if self.replicates < 1:
            raise ParameterError("replicates must be >= 1")
        PreferenceModel(self.model, self.profile_dims, self.seed)
        self.convergence()

    def convergence(self) -> ConvergenceCriterion:
        kind = self.criterion or ("marginal" if self.strategy == "greedy" else "utility")
        return ConvergenceCriterion(kind, self.eps_conv, self.max_iters)

    def seeds(self):
        return list(range(self.seed, self.seed + self.replicates))


def weight_proportional_allocation(weights, budgets=None, bounds=None):
    """Bids proportional to weights and the allocation they induce."""
    bids = init_bids_weight_proportional(weights, budgets, bounds)
    return bids, compute_allocation(bids)


@dataclass
class SweepRow:
    m: int
    seed: int
    strategy: str
    model: str
    delta: int | None
    converged: bool
    iters: int
    stab_iters: int | None
    efficiency: float
    uniformity: float
    envy: float
    eff_opt: float
    eff_wprop: float
    unif_opt: float
    unif_wprop: float
    envy_opt: float
    envy_wprop: float
    efficiency_series: list = field(default_factory=list, repr=False)
    error: str | None = None

    def key(self):
        return (self.m, self.seed)


def run_scenario(cfg: ScenarioConfig, m: int | None = None, seed: int | None = None):
    """Run one (m, seed) scenario; returns ``(row, trace)``."""
    m = cfg.m if m is None else m
    seed = cfg.seed if seed is None else seed
    weights = PreferenceModel(cfg.model, cfg.profile_dims, seed).generate(m, cfg.n)
    bounds = None if cfg.delta is None else np.full(m, cfg.delta)
    game = GameConfig(num_users=m, num_machines=cfg.n, parallelism_bounds=bounds)
    opt = optimum_value(weights, bounds)
    trace = run_dynamics(
        game, weights, cfg.strategy, cfg.convergence(),
        greedy=GreedyParams(step_fraction=cfg.greedy_step),
        keep_bids=False, optimum=opt,
    )
    at_opt = evaluate(weights, optimum_allocation(weights, bounds), bounds, opt)
    at_wprop = evaluate(weights, weight_proportional_allocation(weights, None, bounds)[1], bounds, opt)
    final = trace.final
    row = SweepRow(
        m=m, seed=seed, strategy=cfg.strategy, model=cfg.model, delta=cfg.delta,
        converged=trace.converged,
        iters=trace.iterations,
        stab_iters=trace.stabilization_iteration,
        efficiency=final.efficiency, uniformity=final.uniformity, envy=final.envy,
        eff_opt=at_opt.efficiency, eff_wprop=at_wprop.efficiency,
        unif_opt=at_opt.uniformity, unif_wprop=at_wprop.uniformity,
        envy_opt=at_opt.envy, envy_wprop=at_wprop.envy,
        efficiency_series=[float(v) for v in trace.series("efficiency")],
    )
    return row, trace


def _failed_row(cfg, m, seed, exc):
    nan = math.nan
    return SweepRow(
        m=m, seed=seed, strategy=cfg.strategy, model=cfg.model, delta=cfg.delta,
        converged=False, iters=0, stab_iters=None,
        efficiency=nan, uniformity=nan, envy=nan, eff_opt=nan, eff_wprop=nan,
        unif_opt=nan, unif_wprop=nan, envy_opt=nan, envy_wprop=nan,
        error=f"{type(exc).__name__}: {exc}",
    )


def _run_one(args):
    cfg, m, seed = args
    try:
        return run_scenario(cfg, m, seed)[0]
    except GameError as exc:
        log.warning("scenario m=%d seed=%d failed: %s", m, seed, exc)
        return _failed_row(cfg, m, seed, exc)


@dataclass
class SweepResult:
    rows: list

    def m_values(self):
        return sorted({r.m for r in self.rows})

    def by_m(self, m):
        return [r for r in self.rows if r.m == m]

    def aggregate(self, name, how="mean"):
        """``{m: mean-or-min of field}`` over the rows without errors."""
        out = {}
        for m in self.m_values():
            vals = [getattr(r, name) for r in self.by_m(m) if r.error is None]
            vals = [float(v) for v in vals if v is not None]
            if not vals:
                out[m] = math.nan
            else:
                out[m] = float(np.mean(vals)) if how == "mean" else float(np.min(vals))
        return out


def run_sweep(template: ScenarioConfig, m_values, seeds=None, workers: int = 1) -> SweepResult:
    """Run every (m, seed) pair; rows come back sorted by (m, seed)."""
    seeds = template.seeds() if seeds is None else list(seeds)
    jobs = [(replace(template, m=int(m)), int(m), int(s)) for m in m_values for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    rows.sort(key=SweepRow.key)
    return SweepResult(rows)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_csv(result: SweepResult, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(CSV_FIELDS) + "\n")
            for row in sorted(result.rows, key=SweepRow.key):
                fh.write(",".join(_fmt(getattr(row, f)) for f in CSV_FIELDS) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc
    return path


def _parse(name, text):
    if name in ("strategy", "model"):
        return text
    if text == "":
        return None
    if name == "converged":
        return text == "true"
    if name in ("m", "seed", "delta", "iters", "stab_iters"):
        return int(text)
    return float(text)


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse(k, v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


def emit_plot_series(result: SweepResult, directory) -> list[Path]:
    """One ``<field>.dat`` per metric: ``m mean`` lines, m ascending."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for name in SERIES_FIELDS:
            agg = result.aggregate(name)
            target = directory / f"{name}.dat"
            with open(target, "w", encoding="utf-8") as fh:
                for m in sorted(agg):
                    fh.write(f"{m} {_fmt(agg[m])}\n")
            written.append(target)
    except OSError as exc:
        raise OSError(f"cannot write plot series under {directory}: {exc}") from exc
    return written


def write_svg_chart(series: dict, path, title="", xlabel="users", ylabel="") -> Path:
    """Minimal line chart; ``series`` maps a label to ``{x: y}``."""
    width, height, pad = 480, 320, 48
    pts = [(x, y) for s in series.values() for x, y in s.items() if not math.isnan(y)]
    if not pts:
        raise ParameterError("nothing to plot")
    xs, ys = zip(*pts)
    x0, x1 = min(xs), max(xs) or 1
    y0, y1 = min(0.0, min(ys)), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{pad - 4}" y="{sy(y1)}" text-anchor="end" font-size="10">{y1:.3g}</text>',
        f'<text x="{pad - 4}" y="{sy(y0)}" text-anchor="end" font-size="10">{y0:.3g}</text>',
    ]
    for k, (label, s) in enumerate(series.items()):
        color = colors[k % len(colors)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in sorted(s.items()) if not math.isnan(y))
        parts.append(f'<polyline fill="none" stroke="{color}" points="{coords}"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 14 * k}" fill="{color}" text-anchor="end" font-size="11">{label}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def default_workers():
    return max(1, (os.cpu_count() or 1))
