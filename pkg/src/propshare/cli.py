"""Command line entry point: ``propshare {run,sweep,analytic,worstcase,validate}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .dynamics import check_equilibrium
from .errors import GameError
from .experiments import (
    STRATEGIES,
    ScenarioConfig,
    SweepResult,
    emit_csv,
    emit_plot_series,
    run_sweep,
    write_svg_chart,
)
from .game import compute_allocation, compute_prices, user_utilities
from .optimum import (
    optimum_value,
    symmetric_opposite_efficiency,
    two_player_equal_weight_equilibrium,
    two_player_opposite_equilibria,
    worst_case_instance,
)
from .preferences import MODELS

DEFAULT_M_SWEEP = "5,10,20,40,80,150"

# config-file key -> (argparse dest, converter)
_CONFIG_KEYS = {
    "users": ("users", str),
    "machines": ("machines", int),
    "model": ("model", str),
    "strategy": ("strategy", str),
    "delta": ("delta", int),
    "criterion": ("criterion", str),
    "eps-conv": ("eps_conv", float),
    "max-iters": ("max_iters", int),
    "seed": ("seed", int),
    "replicates": ("replicates", int),
    "profile-dims": ("profile_dims", int),
    "greedy-step": ("greedy_step", float),
    "workers": ("workers", int),
    "out": ("out", str),
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SystemExit(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in _CONFIG_KEYS:
            raise SystemExit(f"{path}:{lineno}: unknown key {key!r}")
        dest, conv = _CONFIG_KEYS[key]
        try:
            values[dest] = conv(value)
        except ValueError:
            raise SystemExit(f"{path}:{lineno}: bad value {value!r} for {key}")
    return values


def _scenario_flags(p, sweep=False):
    p.add_argument("--config", help="key=value file; flags given on the command line win")
    p.add_argument("--users", "-m", default=None,
                   help="number of users" + (" (comma-separated list)" if sweep else ""))
    p.add_argument("--machines", "-n", type=int, default=None, help="number of machines (default 100)")
    p.add_argument("--model", choices=MODELS, default=None)
    p.add_argument("--strategy", choices=STRATEGIES, default=None)
    p.add_argument("--delta", type=int, default=None, help="uniform parallelism bound")
    p.add_argument("--criterion", choices=("utility", "marginal", "welfare"), default=None,
                   help="default: marginal for greedy, utility otherwise")
    p.add_argument("--eps-conv", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--profile-dims", type=int, default=None)
    p.add_argument("--greedy-step", type=float, default=None, help="fraction of budget moved per greedy step")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")


def build_parser():
    parser = argparse.ArgumentParser(prog="propshare", description="Proportional-share market simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single scenario (one row per replicate)")
    _scenario_flags(p)

    p = sub.add_parser("sweep", help="sweep over user counts")
    _scenario_flags(p, sweep=True)
    p.add_argument("--series-dir", help="write per-metric m/mean series here")
    p.add_argument("--svg", help="write an efficiency/uniformity/envy chart here")

    p = sub.add_parser("analytic", help="two-player closed-form tables")
    p.add_argument("--grid", type=int, default=99, help="number of interior alpha values")
    p.add_argument("--out", help="write the table here instead of stdout")

    p = sub.add_parser("worstcase", help="low-efficiency equilibrium on n machines")
    p.add_argument("n", type=int)

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--only", help="comma-separated check numbers, e.g. 1,4,8")
    return parser


def _merge(args):
    values = read_config(args.config) if args.config else {}
    for dest, val in vars(args).items():
        if val is not None:
            values[dest] = val
    return values


def _template(values, sweep):
    users = str(values.get("users", DEFAULT_M_SWEEP if sweep else "40"))
    try:
        m_values = [int(v) for v in users.split(",") if v.strip()]
    except ValueError:
        raise SystemExit(f"--users expects integers, got {users!r}")
    if not m_values:
        raise SystemExit("--users is empty")
    if not sweep and len(m_values) != 1:
        raise SystemExit("run takes a single --users value; use sweep for lists")
    kw = {k: values[k] for k in ("model", "strategy", "delta", "criterion", "eps_conv",
                                 "max_iters", "seed", "replicates", "profile_dims", "greedy_step")
          if k in values}
    if "machines" in values:
        kw["n"] = values["machines"]
    if kw.get("delta") is not None and "strategy" not in kw:
        kw["strategy"] = "ls"
    try:
        return ScenarioConfig(m=m_values[0], **kw), m_values
    except GameError as exc:
        raise SystemExit(f"invalid configuration: {exc}")


def _print_rows(result: SweepResult, out):
    print("m seed converged iters stab efficiency uniformity envy", file=out)
    for r in result.rows:
        if r.error:
            print(f"{r.m} {r.seed} error: {r.error}", file=out)
            continue
        stab = "-" if r.stab_iters is None else r.stab_iters
        print(f"{r.m} {r.seed} {str(r.converged).lower()} {r.iters} {stab} "
              f"{r.efficiency:.4f} {r.uniformity:.4f} {r.envy:.4f}", file=out)


def cmd_scenario(args, sweep):
    values = _merge(args)
    template, m_values = _template(values, sweep)
    result = run_sweep(template, m_values, workers=values.get("workers", 1))
    _print_rows(result, sys.stdout)
    if sweep:
        for m in result.m_values():
            agg = {k: result.aggregate(k)[m] for k in ("efficiency", "uniformity", "envy", "iters")}
            print(f"mean m={m}: eff {agg['efficiency']:.4f} unif {agg['uniformity']:.4f} "
                  f"envy {agg['envy']:.4f} iters {agg['iters']:.1f}")
    if values.get("out"):
        emit_csv(result, values["out"])
        print(f"wrote {values['out']}")
    if sweep and args.series_dir:
        for path in emit_plot_series(result, args.series_dir):
            print(f"wrote {path}")
    if sweep and args.svg:
        series = {k: result.aggregate(k) for k in ("efficiency", "uniformity", "envy")}
        write_svg_chart(series, args.svg, title=f"{template.strategy}, n={template.n}", ylabel="metric")
        print(f"wrote {args.svg}")
    return 0 if all(r.error is None for r in result.rows) else 2


def cmd_analytic(args):
    lines = ["alpha equal_x equal_eff sym_eff sym_eff_formula asym_count asym_eff"]
    low = (None, np.inf)
    for k in range(1, args.grid + 1):
        a = k / (args.grid + 1)
        eq = two_player_equal_weight_equilibrium(a)
        opp = two_player_opposite_equilibria(a)
        sym = next(e for e in opp if abs(e.delta - 1) < 1e-12)
        asym = [e for e in opp if abs(e.delta - 1) >= 1e-12]
        asym_eff = f"{asym[0].efficiency:.9f}" if asym else "-"
        lines.append(f"{a:.4f} {eq.x:.9f} {eq.efficiency:.9f} {sym.efficiency:.9f} "
                     f"{symmetric_opposite_efficiency(a):.9f} {len(asym)} {asym_eff}")
        if sym.efficiency < low[1]:
            low = (a, sym.efficiency)
    lines.append(f"# lowest symmetric efficiency {low[1]:.9f} at alpha={low[0]:.4f}; "
                 f"bound 2*sqrt(2)-2 = {2 * np.sqrt(2) - 2:.9f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_worstcase(args):
    try:
        wc = worst_case_instance(args.n)
    except GameError as exc:
        raise SystemExit(str(exc))
    cert = check_equilibrium(wc.bids, wc.weights)
    welfare = float(user_utilities(wc.weights, compute_allocation(wc.bids)).sum())
    opt = optimum_value(wc.weights)
    print(f"users {wc.config.num_users}, machines {wc.config.num_machines}")
    print(f"machine totals {np.array2string(compute_prices(wc.bids), precision=6)}")
    print(f"KKT residual {cert.kkt_residual:.3e}")
    print(f"welfare {welfare:.6f}, optimum {opt:.6f}, efficiency {welfare / opt:.6f} (2/n = {2 / args.n:.6f})")
    return 0


def cmd_validate(args):
    from .validation import run_all

    selected = None if not args.only else {s.strip() for s in args.only.split(",")}
    results = run_all(selected, out=sys.stdout)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("run", "sweep"):
        return cmd_scenario(args, args.command == "sweep")
    if args.command == "analytic":
        return cmd_analytic(args)
    if args.command == "worstcase":
        return cmd_worstcase(args)
    return cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
