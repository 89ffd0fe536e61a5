"""Run every config under configs/ and print the n-by-learner distance table."""
import argparse
import sys
from pathlib import Path

from convex_pricing.config import load_config
from convex_pricing.experiment import run_experiment, summarize, write_results, write_summary

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", help="config files (default: configs/*.cfg)")
    ap.add_argument("--out-root", default=str(ROOT / "results"))
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)
    paths = [Path(p) for p in args.configs] or sorted((ROOT / "configs").glob("*.cfg"))
    for path in paths:
        cfg = load_config(path)
        out = Path(args.out_root) / path.stem
        rows = run_experiment(cfg, workers=args.workers)
        write_results(rows, cfg, out / "results.csv")
        write_summary(rows, cfg, out / "summary.csv")
        print(f"== {cfg.scenario_name} ({path.name}) -> {out}")
        print(f"{'learner':<16}{'n':>8}{'ok':>5}{'distance':>12}{'se':>10}{'revenue':>10}{'oracle':>10}")
        for sc, learner, n, ok, _, dm, dse, rm, _, om in summarize(rows):
            print(f"{learner:<16}{n:>8}{ok:>5}{dm:>12.4f}{dse:>10.4f}{rm:>10.4f}{om:>10.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
