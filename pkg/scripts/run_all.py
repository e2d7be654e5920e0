#!/usr/bin/env python3
"""Run every named experiment at a common scale, one output directory each.

    python3 scripts/run_all.py --scale 0.2 --seed 42 --out results/
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from abcmc.experiments import EXPERIMENTS, expand_config, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", nargs="*", choices=EXPERIMENTS, default=list(EXPERIMENTS))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for exp in args.only:
        t0 = time.time()
        cfg = expand_config(exp, args.scale, args.seed)
        run_experiment(cfg, Path(args.out) / exp)
        print(f"{exp}: {time.time() - t0:.1f}s", file=sys.stderr)


if __name__ == "__main__":
    main()
