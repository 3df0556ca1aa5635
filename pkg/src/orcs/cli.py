"""Command-line front end.

Subcommands: ``segment``, ``path``, ``synth``, ``eval``, ``bound``.  Every
output file gets a sidecar ``<file>.manifest.json`` (command, arguments,
input digest, seed, version, wall time) so the output itself stays
byte-identical across runs.  Exit codes: 0 success, 2 bad input or flags,
3 solver did not converge (result still written, flagged).

Boundaries and outlier indices in files are 1-based: boundary ``i`` means a
new segment starts after sample ``i``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .bench import (BoundParams, SynthSpec, empirical_split_error, generate, m0,
                    random_spec)
from .core import SolverConfig, Weights, as_sequence, objective_dense
from .metrics import match_boundaries, mean_boundary_error
from .path import estimate_outlier_count, sweep
from .solver import solve_orcs
from .topdown import bottom_up, td_orcs

EXIT_OK, EXIT_INPUT, EXIT_NOCONV = 0, 2, 3
CONVENTION = "1-based; boundary i means a new segment starts after sample i"


class InputError(Exception):
    pass


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def _digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _write(path, text: str, args, inputs=(), seed=None, t0=None):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")
    manifest = {
        "command": args.command,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "input_digest": _digest(inputs) if inputs else None,
        "seed": seed,
        "version": _version(),
        "wall_time_s": None if t0 is None else time.perf_counter() - t0,
    }
    Path(str(path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def read_sequence(path, header: bool = False) -> np.ndarray:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    try:
        return as_sequence(np.array([[float(c) for c in r] for r in rows], dtype=float))
    except ValueError as e:
        raise InputError(f"{path}: {e}") from e


def parse_weights(text: str) -> Weights:
    if text.startswith("power"):
        _, _, a = text.partition(":")
        return Weights("power", float(a) if a else 0.5)
    return Weights(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# -- subcommands --------------------------------------------------------------

def cmd_segment(args) -> int:
    t0 = time.perf_counter()
    x = read_sequence(args.input, args.header)
    n, d = x.shape
    w = parse_weights(args.weights)
    algo = args.algo
    if algo == "orcs":
        if args.lam is None or args.gamma is None:
            raise InputError("--algo orcs needs --lambda and --gamma")
        cfg = SolverConfig(lam=args.lam, gamma=args.gamma, q=args.q, weights=w)
        sol = solve_orcs(x, cfg)
        starts, outliers = sol.segmentation.starts, sol.outliers.indices
        obj, ok = sol.objective, sol.converged
    elif algo in ("td", "wtd"):
        if args.k is None or args.m is None:
            raise InputError(f"--algo {algo} needs --k and --m")
        res = td_orcs(x, args.k, args.m, w=Weights("sqrt") if algo == "wtd" else w,
                      centroid=args.centroid, gamma_rule=args.gamma_rule)
        starts, outliers, ok = res.segmentation.starts, res.outliers.indices, res.converged
        z = res.outliers.dense(n, d)
        obj = objective_dense(x, res.segmentation.expand(n), z, 0.0, 0.0, None)
    else:
        if args.k is None:
            raise InputError("--algo bu needs --k")
        seg = bottom_up(x, args.k)
        starts, outliers, ok = seg.starts, [], True
        obj = objective_dense(x, seg.expand(n), np.zeros_like(x), 0.0, np.inf, None)
    doc = {
        "convention": CONVENTION,
        "algo": algo,
        "boundaries": [int(s) for s in starts[1:]],
        "outliers": [int(i) + 1 for i in outliers],
        "objective": float(obj),
        "converged": bool(ok),
        "segments": len(starts),
    }
    _write(args.out, _dumps(doc), args, [args.input], t0=t0)
    return EXIT_OK if ok else EXIT_NOCONV


def cmd_path(args) -> int:
    t0 = time.perf_counter()
    x = read_sequence(args.input, args.header)
    try:
        G, L = (int(v) for v in args.grid.lower().split("x"))
    except ValueError as e:
        raise InputError(f"bad --grid {args.grid!r}, expected e.g. 35x35") from e
    if G < 1 or L < 1:
        raise InputError("grid dimensions must be positive")
    cfg = SolverConfig(lam=0.0, q=args.q, weights=parse_weights(args.weights))
    grid = sweep(x, (G, L), cfg, threads=args.threads)
    _write(args.out, grid.to_csv(), args, [args.input], t0=t0)
    est = estimate_outlier_count(grid)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["outliers", "cells"])
    for k, c in grid.outlier_histogram().items():
        wr.writerow([k, c])
    hist_path = args.hist or (None if args.out in (None, "-") else str(args.out) + ".hist.csv")
    if hist_path:
        _write(hist_path, buf.getvalue(), args, [args.input], t0=t0)
    sys.stderr.write(f"estimated outlier count: {est if est is not None else 'none'}\n")
    return EXIT_OK if grid.converged.all() else EXIT_NOCONV


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    if args.spec:
        try:
            raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
            spec = SynthSpec(**raw)
        except (OSError, ValueError, TypeError) as e:
            raise InputError(f"bad spec file: {e}") from e
    else:
        spec = random_spec(args.n, args.k, args.d, args.seed, jump=args.jump,
                           noise_scale=args.noise_scale, outlier_count=args.outliers,
                           outlier_amplitude=args.amplitude, noise=args.noise)
    x, truth, out = generate(spec)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    for row in x:
        wr.writerow([repr(float(v)) for v in row])
    _write(args.out, buf.getvalue(), args, seed=spec.seed, t0=t0)
    doc = {"convention": CONVENTION, "boundaries": list(truth.boundaries),
           "outliers": [i + 1 for i in out]}
    if args.truth:
        _write(args.truth, _dumps(doc), args, seed=spec.seed, t0=t0)
    return EXIT_OK


def _load_points(path, key="boundaries"):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        pts = sorted({int(v) for v in doc[key]})
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: expected JSON with a {key!r} list ({e})") from e
    return pts


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    det = _load_points(args.detected)
    tru = _load_points(args.truth)
    rep = match_boundaries(det, tru, args.tol)
    doc = {
        "precision": rep.precision if rep.n_detected else None,
        "recall": rep.recall if rep.n_truth else None,
        "f": rep.f,
        "r": rep.r if rep.n_truth else None,
        "mean_error": mean_boundary_error(det, tru) if tru and det else None,
        "true_positives": rep.true_positives,
        "false_positives": rep.false_positives,
        "false_negatives": rep.false_negatives,
        "tolerance": args.tol,
    }
    _write(args.out, _dumps(doc), args, [args.detected, args.truth], t0=t0)
    return EXIT_OK


def cmd_bound(args) -> int:
    t0 = time.perf_counter()
    try:
        p = BoundParams(args.n, args.n1, args.dmu, args.bound, args.delta)
    except ValueError as e:
        raise InputError(str(e)) from e
    spec = SynthSpec(((0.0,), (args.dmu,)), (args.n1, args.n - args.n1), noise="uniform",
                     noise_scale=args.bound / 2, seed=args.seed)
    curve = empirical_split_error(spec, parse_weights(args.weights), args.trials,
                                  m_max=args.m_max, bound=p, threads=args.threads)
    _write(args.out, curve.to_csv(), args, seed=args.seed, t0=t0)
    sys.stderr.write(f"C = {p.C!r}\nm0 = {m0(p)!r}\nP(|m*| >= m0) = {curve.p_far!r}\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="orcs", description="Outlier-robust convex segmentation.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("input", help="CSV, one sample per row")
            p.add_argument("--header", action="store_true", help="skip the first CSV row")
        p.add_argument("--out", default="-", help="output file (default stdout)")
        return p

    p = common(sub.add_parser("segment", help="segment a sequence"))
    p.add_argument("--algo", choices=["orcs", "td", "wtd", "bu"], default="orcs")
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--gamma", type=float, help="outlier penalty; 'inf' disables outliers")
    p.add_argument("--weights", default="uniform", help="uniform, sqrt or power:ALPHA")
    p.add_argument("--q", type=int, choices=[1, 2], default=2)
    p.add_argument("--centroid", choices=["piecewise", "segment"], default="piecewise",
                   help="td/wtd: residual reference inside a candidate split")
    p.add_argument("--gamma-rule", choices=["midpoint", "lower"], default="midpoint",
                   help="td/wtd: gamma placement inside the detection interval")
    p.set_defaults(func=cmd_segment)

    p = common(sub.add_parser("path", help="sweep the (gamma, lambda) grid"))
    p.add_argument("--grid", default="35x35")
    p.add_argument("--weights", default="uniform")
    p.add_argument("--q", type=int, choices=[1, 2], default=2)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--hist", help="histogram CSV (default <out>.hist.csv)")
    p.set_defaults(func=cmd_path)

    p = common(sub.add_parser("synth", help="generate synthetic data"), data=False)
    p.add_argument("--spec", help="JSON file with SynthSpec fields")
    p.add_argument("--truth", help="ground-truth JSON output")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jump", type=float, default=3.0)
    p.add_argument("--noise", choices=["none", "uniform", "tgauss"], default="tgauss")
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--outliers", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=10.0)
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("eval", help="score detected boundaries"), data=False)
    p.add_argument("--detected", required=True, help="result or truth JSON")
    p.add_argument("--truth", required=True)
    p.add_argument("--tol", type=int, default=2)
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("bound", help="split-error bounds and Monte Carlo curve"),
               data=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--dmu", type=float, required=True)
    p.add_argument("--bound", type=float, required=True, help="data bound B")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--m-max", type=int)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weights", default="uniform")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bound)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError) as e:
        sys.stderr.write(f"orcs: error: {e}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
