"""Compare the top-down centroid and gamma options on noise-free spiky sequences.

    python3 scripts/spike_variants.py --seeds 100
"""
import argparse

import numpy as np

from orcs.bench import generate, random_spec
from orcs.metrics import match_boundaries
from orcs.topdown import wtd_orcs

VARIANTS = [("midpoint", "piecewise"), ("midpoint", "segment"), ("lower", "piecewise"),
            ("lower", "segment")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--amplitude", type=float, default=30.0)
    a = ap.parse_args()
    print("gamma_rule,centroid,median_r,mean_r,exact_fraction")
    for rule, centroid in VARIANTS:
        rs = []
        for s in range(a.seeds):
            x, truth, _ = generate(random_spec(120, 4, 2, s, noise="none", outlier_count=6,
                                               outlier_amplitude=a.amplitude))
            res = wtd_orcs(x, 4, 6, centroid=centroid, gamma_rule=rule)
            rs.append(match_boundaries(res.boundaries, truth.boundaries, 2).r)
        print(f"{rule},{centroid},{np.median(rs):.3f},{np.mean(rs):.3f},"
              f"{np.mean(np.equal(rs, 1.0)):.2f}", flush=True)


if __name__ == "__main__":
    main()
