"""Command-line front end. Every command writes CSV and is a pure function of its arguments."""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import bounds as bounds_mod
from .config import ConfigError, load_config, parse_price_law
from .core import CsvFormatError, load_csv, save_csv, validate_dataset
from .experiment import run_experiment, write_results, write_summary
from .losses import LossSpec
from .policies import cross_validate, fit_kernel_demand, fit_logistic_demand, kernel_ipw_policy, model_free_policy
from .solver import SolverConfig, fit_convex
from .synthetic import G_KINDS, VALUATION_FAMILIES, Scenario, generate

POLICY_SCHEMA = "convex_pricing.policy/1"
FULL_N = 300_000


class CliError(Exception):
    pass


def _num(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def _param(v) -> str:
    return format(float(v), ".12g")


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _csv_text(header: Sequence[str], rows, comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# bounds / tightness


def cmd_bounds(args) -> int:
    if args.steps < 1:
        raise argparse.ArgumentTypeError("--steps must be at least 1")
    lo, hi = args.min, args.max
    upper_ok = hi <= 1.0 if args.kind == "hinge" else hi < 1.0
    if not (0.0 < lo <= hi and upper_ok):
        dom = "0 < c <= 1" if args.kind == "hinge" else "0 < tau < 1"
        raise CliError(f"bad range [{lo}, {hi}] for {args.kind}; need min <= max within {dom}")
    if args.steps > 1 and lo == hi:
        raise CliError("min == max needs --steps 1")
    grid = [lo] if args.steps == 1 else np.linspace(lo, hi, args.steps).tolist()
    curve = bounds_mod.bound_curve(args.kind, grid)
    rows = [[_param(p), _num(v), b] for p, v, b in curve.rows()]
    _emit(_csv_text(["param", "value", "branch"], rows), args.out)
    return 0


def cmd_tightness(args) -> int:
    rows = []
    for p in _floats(args.params):
        try:
            r = bounds_mod.verify_tightness(args.kind, p)
            rows.append([_param(p), _num(r.bound_value), _num(r.achieved_ratio), _num(r.gap), args.kind,
                         _num(r.two_sided_bound), r.distribution_kind])
        except ValueError as exc:
            rows.append([_param(p), "nan", "nan", "nan", f"invalid:{exc}", "nan", ""])
    header = ["param", "bound", "achieved", "gap", "case", "two_sided_bound", "distribution"]
    _emit(_csv_text(header, rows), args.out)
    return 0


# ---------------------------------------------------------------------------
# data-driven commands


def _load_data(args, needs_propensity: bool):
    data = load_csv(args.data)
    if args.propensity_model:
        data = data.with_propensity(parse_price_law(args.propensity_model))
    elif needs_propensity and data.propensity is None:
        raise CliError(f"{args.data} has no propensity column; pass --propensity-model "
                       "(for example --propensity-model uniform:1,3)")
    problems = [v for v in validate_dataset(data)
                if not (v.message == "propensity unset" and not needs_propensity)]
    if problems:
        shown = "; ".join(f"row {v.index}: {v.message}" for v in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise CliError(f"invalid dataset: {shown}{more}")
    return data


def _solver(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, multistarts=args.multistarts, seed=args.seed,
                        intercept=args.intercept, reg_lambda=args.reg_lambda)


def _loss_params(args):
    if args.loss == "hinge":
        return LossSpec.hinge(args.c), f"c={_param(args.c)}"
    if args.loss == "quantile":
        if args.tau is None:
            raise CliError("--tau is required for the quantile loss")
        return LossSpec.quantile(args.tau), f"tau={_param(args.tau)}"
    if args.loss == "eps_insensitive":
        return LossSpec.eps_insensitive(args.c1, args.c2), f"c1={args.c1} c2={args.c2}"
    if args.loss == "kernel_ipw":
        return LossSpec.kernel_ipw(args.bandwidth), f"bandwidth={_param(args.bandwidth)}"
    return LossSpec.model_free(), ""


def cmd_fit(args) -> int:
    spec, params = _loss_params(args)
    data = _load_data(args, needs_propensity=spec.kind != "eps_insensitive" and spec.kind != "model_free")
    cfg = _solver(args)
    if spec.kind == "kernel_ipw":
        res = kernel_ipw_policy(data, args.bandwidth, cfg)
    elif spec.kind == "model_free":
        res = model_free_policy(data, cfg)
    else:
        res = fit_convex(spec, data, cfg)
    theta = res.policy.theta
    header = [f"theta{j}" for j in range(theta.size)]
    comments = [f"schema: {POLICY_SCHEMA}", f"loss: {spec.kind}", f"params: {params}",
                f"objective: {_num(res.objective)}", f"seed: {args.seed}",
                f"intercept: {str(args.intercept).lower()}", f"iterations: {res.iterations}",
                f"converged: {str(res.converged).lower()}"]
    _emit(_csv_text(header, [[_num(v) for v in theta]], comments), args.out)
    return 0


def _parse_grid(kind: str, text: Optional[str]):
    if text is None:
        return None
    if kind != "eps_insensitive":
        return _floats(text)
    grid = []
    for item in text.split(","):
        a, _, b = item.partition(":")
        conv = [None if s.strip().lower() in ("none", "inf", "-inf") else float(s) for s in (a, b)]
        grid.append(tuple(conv))
    return grid


def cmd_crossval(args) -> int:
    data = _load_data(args, needs_propensity=args.loss != "eps_insensitive")
    demand = fit_logistic_demand(data) if args.demand == "logistic" else fit_kernel_demand(data, seed=args.seed)
    cv = cross_validate(args.loss, data, demand, _parse_grid(args.loss, args.grid), _solver(args),
                        refine=args.refine)
    m = cv.policies[0].theta.size
    rows = []
    for i, (p, pol, rev) in enumerate(zip(cv.grid, cv.policies, cv.estimated_revenues)):
        label = ":".join("none" if v is None else _param(v) for v in p) if isinstance(p, tuple) else _param(p)
        rows.append([label, _num(rev), int(i == cv.chosen_index)] + [_num(v) for v in pol.theta])
    header = ["param", "estimated_revenue", "chosen"] + [f"theta{j}" for j in range(m)]
    comments = [f"loss: {args.loss}", f"demand: {args.demand}", f"seed: {args.seed}"]
    _emit(_csv_text(header, rows, comments), args.out)
    return 0


def cmd_simulate(args) -> int:
    kw = {}
    if args.family == "shifted_exponential":
        kw = dict(feature_low=1.0, feature_high=5.0)
    if args.feature_low is not None:
        kw["feature_low"] = args.feature_low
    if args.feature_high is not None:
        kw["feature_high"] = args.feature_high
    law = parse_price_law(args.price_law) if args.price_law else (
        parse_price_law("uniform:0,15") if args.family == "shifted_exponential" else parse_price_law("uniform:1,3"))
    sc = Scenario(args.family, args.g, price_law=law, n=args.n, seed=args.seed, **kw)
    data, _ = generate(sc)
    if args.out in (None, "-"):
        raise CliError("simulate needs --out PATH")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_csv(data, args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.full and FULL_N not in cfg.n_grid:
        cfg = replace(cfg, n_grid=tuple(cfg.n_grid) + (FULL_N,))
    out_dir = Path(args.out_dir or cfg.output_dir)

    def progress(n, rep):
        if not args.quiet:
            print(f"done n={n} rep={rep}", file=sys.stderr, flush=True)

    rows = run_experiment(cfg, workers=args.workers, progress=progress)
    write_results(rows, cfg, out_dir / "results.csv")
    write_summary(rows, cfg, out_dir / "summary.csv")
    failed = sum(r.status != "ok" for r in rows)
    if not args.quiet:
        print(f"wrote {len(rows)} rows ({failed} failed) to {out_dir}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_solver_flags(p):
    p.add_argument("--seed", type=int, default=0, help="solver seed (random restarts)")
    p.add_argument("--max-iters", type=int, default=50_000, help="subgradient iteration cap")
    p.add_argument("--multistarts", type=int, default=10, help="random restarts for non-convex learners")
    p.add_argument("--reg-lambda", type=float, default=0.0, help="ridge penalty")
    p.add_argument("--intercept", action="store_true", help="append a constant feature")
    p.add_argument("--propensity-model", metavar="LAW",
                   help="logging price law used as propensity, e.g. uniform:1,3, triangular:1,5,5, "
                        "exponential:rate=0.4, lognormal:0,1")
    p.add_argument("--out", default="-", help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="convex-pricing", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="worst-case revenue ratio curve: param,value,branch")
    p.add_argument("--kind", choices=("hinge", "quantile"), required=True)
    p.add_argument("--min", type=float, required=True, help="smallest parameter")
    p.add_argument("--max", type=float, required=True, help="largest parameter")
    p.add_argument("--steps", type=int, required=True, help="number of evenly spaced grid points (>= 1)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("tightness", help="achieved ratio on extremal distributions: param,bound,achieved,gap,case")
    p.add_argument("--kind", choices=bounds_mod.WORST_CASE_KINDS, required=True)
    p.add_argument("--params", required=True, help="comma-separated parameter values")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_tightness)

    p = sub.add_parser("fit", help="fit one linear pricing policy to a dataset CSV")
    p.add_argument("--data", required=True, help="CSV with x0..x{m-1},price,sold[,propensity]")
    p.add_argument("--loss", choices=("hinge", "quantile", "eps_insensitive", "kernel_ipw", "model_free"),
                   required=True)
    p.add_argument("--c", type=float, default=1.0, help="hinge parameter")
    p.add_argument("--tau", type=float, help="quantile level")
    p.add_argument("--c1", type=float, help="eps-insensitive upper factor (omit for infinity)")
    p.add_argument("--c2", type=float, help="eps-insensitive lower factor (omit for minus infinity)")
    p.add_argument("--bandwidth", type=float, default=0.2, help="kernel-IPW bandwidth")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("crossval", help="choose a convex-loss parameter by plug-in revenue")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=("hinge", "quantile", "eps_insensitive"), required=True)
    p.add_argument("--demand", choices=("logistic", "kernel_smoother"), default="kernel_smoother",
                   help="demand model scoring each candidate")
    p.add_argument("--grid", help="comma-separated values; eps-insensitive pairs as c1:c2 (none for unbounded)")
    p.add_argument("--refine", type=int, default=0,
                   help="extra rounds around the winner at a fifth of the grid spacing (hinge, quantile)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    p.add_argument("--family", choices=VALUATION_FAMILIES, default="uniform_band")
    p.add_argument("--g", choices=G_KINDS, default="linear")
    p.add_argument("--price-law", help="logging price law (default uniform:1,3 or uniform:0,15)")
    p.add_argument("--feature-low", type=float)
    p.add_argument("--feature-high", type=float)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="replicated synthetic benchmark from a key=value config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="overrides output_dir from the config")
    p.add_argument("--workers", type=int, help="process pool size (overrides config)")
    p.add_argument("--full", action="store_true", help=f"append n={FULL_N} to the size grid")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        ap.error(str(exc))
    except (CliError, ConfigError, CsvFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
