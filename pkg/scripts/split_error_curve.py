"""Monte Carlo split-error curve against the analytic bounds on a two-level sequence.

    python3 scripts/split_error_curve.py --trials 10000 --out curve.csv
"""
import argparse
import sys

from orcs.bench import SynthSpec, empirical_split_error


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n1", type=int, default=50)
    ap.add_argument("--n2", type=int, default=50)
    ap.add_argument("--dmu", type=float, default=2.0)
    ap.add_argument("--half-width", type=float, default=1.0, help="uniform noise half-width")
    ap.add_argument("--trials", type=int, default=10000)
    ap.add_argument("--m-max", type=int, default=40)
    ap.add_argument("--weights", default=None, help="uniform (default) or sqrt")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    a = ap.parse_args()
    spec = SynthSpec(((0.0,), (a.dmu,)), (a.n1, a.n2), noise="uniform",
                     noise_scale=a.half_width, seed=a.seed)
    curve = empirical_split_error(spec, a.weights, trials=a.trials, m_max=a.m_max,
                                  threads=a.threads)
    print(f"m0 = {curve.m0:.4f}  P(|m*| >= m0) = {curve.p_far:.4f}", file=sys.stderr)
    text = curve.to_csv()
    if a.out == "-":
        sys.stdout.write(text)
    else:
        with open(a.out, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
