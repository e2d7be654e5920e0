#!/usr/bin/env python3
"""Write the compatibility diagnosis of every named experiment to OUT/<id>_compat.csv."""

import argparse
from pathlib import Path

from abcmc.experiments import EXPERIMENTS, emit_compatibility_table, expand_config

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="results")
args = ap.parse_args()
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
for exp in EXPERIMENTS:
    emit_compatibility_table(expand_config(exp), out / f"{exp}_compat.csv")
    print(out / f"{exp}_compat.csv")
