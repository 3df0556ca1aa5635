"""Outlier-count estimate from the (gamma, lambda) solution path over several seeds.

    python3 scripts/outlier_plateau.py --seeds 20 --grid 35
"""
import argparse

from orcs.bench import generate, random_spec
from orcs.path import estimate_outlier_count, sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--outliers", type=int, default=10)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--grid", type=int, default=35)
    ap.add_argument("--threads", type=int, default=1)
    a = ap.parse_args()
    hits = 0
    print("seed,true,estimate")
    for s in range(a.seeds):
        x, _, out = generate(random_spec(a.n, a.k, a.d, s, outlier_count=a.outliers,
                                         outlier_amplitude=10.0))
        est = estimate_outlier_count(sweep(x, (a.grid, a.grid), threads=a.threads))
        hits += est is not None and abs(est - len(out)) <= 0.2 * len(out)
        print(f"{s},{len(out)},{'' if est is None else est}", flush=True)
    print(f"# within 20%: {hits}/{a.seeds}")


if __name__ == "__main__":
    main()
