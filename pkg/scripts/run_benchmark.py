"""Grid-searched comparison of the three classifiers on the bundled fixtures.

    python3 scripts/run_benchmark.py [--out bench.csv] [--datasets iris glass] [--holdout 0.2]

Uses the reduced grid and 5-fold stratified CV; writes one CSV row per
(dataset, model) and prints the rows as they finish.
"""

import argparse

from gbtwin.cli import run_cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="bench.csv")
    ap.add_argument("--datasets", nargs="+")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--holdout", type=float)
    args = ap.parse_args()
    argv = ["bench", "--out", args.out, "--seed", str(args.seed)]
    if args.datasets:
        argv += ["--datasets", *args.datasets]
    if args.holdout is not None:
        argv += ["--holdout", str(args.holdout)]
    raise SystemExit(run_cli(argv))


if __name__ == "__main__":
    main()
