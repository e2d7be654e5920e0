#!/usr/bin/env python3
"""Print the boxplot quartiles stored in one or more summary.json files."""

import json
import sys

for path in sys.argv[1:]:
    cells = json.load(open(path))["cells"]
    print(path)
    for c in cells:
        q = c["posterior_prob_m1"]
        extra = f"  reject={c['rejection_rate']:.2f}" if "rejection_rate" in c else ""
        print(f"  {c['statistics']:<28} n={c['sample_size']:<6} truth=M{c['true_model']}  "
              f"P(M1): q1={q['q1']:.3f} med={q['median']:.3f} q3={q['q3']:.3f}{extra}")
