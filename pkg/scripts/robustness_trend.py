"""Median R of TD-ORCS, WTD-ORCS and bottom-up under growing spike contamination.

    python3 scripts/robustness_trend.py --seeds 50 --out trend.csv
"""
import argparse
import csv
import sys

import numpy as np

from orcs.bench import generate, random_spec
from orcs.metrics import match_boundaries
from orcs.topdown import bottom_up, td_orcs, wtd_orcs


def run(n, K, d, seeds, levels, tol, centroid, gamma_rule):
    rows = []
    for pct in levels:
        M = round(pct / 100 * n)
        r = {"td": [], "wtd": [], "bu": []}
        for s in range(seeds):
            x, truth, _ = generate(random_spec(n, K, d, 1000 + s, outlier_count=M,
                                               outlier_amplitude=10.0))
            kw = dict(centroid=centroid, gamma_rule=gamma_rule)
            for name, seg in (("td", td_orcs(x, K, M, **kw)), ("wtd", wtd_orcs(x, K, M, **kw)),
                              ("bu", bottom_up(x, K))):
                r[name].append(match_boundaries(seg.boundaries, truth.boundaries, tol).r)
        rows.append([pct, M] + [float(np.median(r[k])) for k in ("td", "wtd", "bu")])
        print(f"{pct:3d}%  td {rows[-1][2]:.3f}  wtd {rows[-1][3]:.3f}  bu {rows[-1][4]:.3f}",
              file=sys.stderr)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--max-pct", type=int, default=16)
    ap.add_argument("--tol", type=int, default=2)
    ap.add_argument("--centroid", choices=["piecewise", "segment"], default="piecewise")
    ap.add_argument("--gamma-rule", choices=["midpoint", "lower"], default="midpoint")
    ap.add_argument("--out", default="-")
    a = ap.parse_args()
    rows = run(a.n, a.k, a.d, a.seeds, range(0, a.max_pct + 1, 2), a.tol, a.centroid,
               a.gamma_rule)
    fh = sys.stdout if a.out == "-" else open(a.out, "w", newline="")
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(["contamination_pct", "outliers", "median_r_td", "median_r_wtd", "median_r_bu"])
    wr.writerows(rows)


if __name__ == "__main__":
    main()
