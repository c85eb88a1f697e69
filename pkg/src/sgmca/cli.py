"""Command-line interface.

Exit codes: 0 on success, 1 on validation or runtime failure, 2 on usage
errors. Option values come from flags first, then from an optional
``--config`` file of ``key = value`` lines, then from built-in defaults.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .dataio import format_matrix, load_images, load_matrix, load_model, save_model, tile
from .evaluation import METHODS, ExperimentSpec, results_csv, results_json, run_experiment, sweep
from .sgm import PrescribedCovariance, SgmConfig, apply, train

DEFAULTS = {
    "k": 5,
    "n": 20,
    "seed": 0,
    "tol": 1e-12,
    "max_iters": 100,
    "n_knn_train": 1000,
    "n_knn_test": 500,
    "neighbors": 15,
    "weights": None,
    "workers": 1,
    "method": "sgm",
    "methods": ",".join(METHODS),
}

_FLOAT = "{:.17g}".format


class UsageError(Exception):
    pass


def read_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_floats(values):
    if values is None:
        return None
    if isinstance(values, str):
        values = [values]
    try:
        return [float(x) for v in values for x in v.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"invalid number list {values!r}") from exc


def parse_ints(text):
    """Parse ``"5,10,15"``, ``"2..20"`` or ``"2..20:2"`` into a list of ints."""
    if isinstance(text, (list, tuple)):
        text = ",".join(str(t) for t in text)
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, _, rest = part.partition("..")
                hi, _, step = rest.partition(":")
                out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise UsageError(f"invalid integer list {text!r}") from exc
    if not out:
        raise UsageError(f"empty integer list {text!r}")
    return out


def parse_methods(text):
    names = [s.strip() for s in str(text).split(",") if s.strip()]
    bad = [s for s in names if s not in METHODS]
    if bad or not names:
        raise UsageError(f"unknown method {', '.join(bad) or '(none)'}; valid methods: {', '.join(METHODS)}")
    return names


def resolve(args, *keys):
    """Fill unset options from the config file, then from defaults."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    for key in keys:
        if getattr(args, key, None) is None:
            setattr(args, key, cfg.get(key, DEFAULTS.get(key)))
    return args


def build_parser():
    p = argparse.ArgumentParser(prog="sgmca", description="Star-graph multimodal matching component analysis")
    p.add_argument("--config", help="key = value file with option defaults")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit SGM maps from CSV data (one sample per row)")
    t.add_argument("--data", nargs="+", required=True, help="CSV per modality, central modality first")
    t.add_argument("--cov", nargs="+", help="k x k covariance CSV per modality, or 'identity'")
    t.add_argument("--weights", nargs="+", help="m weights summing to 1")
    t.add_argument("--k", type=int)
    t.add_argument("--tol", type=float, help="relative SVD rank tolerance")
    t.add_argument("--max-iters", dest="max_iters", type=int)
    t.add_argument("--out", "--model", dest="out", required=True, help="output SGM1 model file")

    a = sub.add_parser("apply", help="map CSV rows through one modality's affine map")
    a.add_argument("--model", required=True)
    a.add_argument("--modality", type=int, required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--out", help="output CSV (default: standard output)")

    for name, multi in (("experiment", False), ("sweep", True)):
        e = sub.add_parser(name, help="run the tile transfer experiment" + (" over k" if multi else ""))
        e.add_argument("--images", required=True, help="IDX image file (optionally gzipped)")
        e.add_argument("--labels", required=True, help="IDX label file (optionally gzipped)")
        if multi:
            e.add_argument("--methods", help="comma list of methods")
            e.add_argument("--k", help="k values: '5,10,15' or '2..20'")
            e.add_argument("--workers", type=int)
        else:
            e.add_argument("--method", help="one of " + ", ".join(METHODS))
            e.add_argument("--k", type=int)
        e.add_argument("--n", type=int, help="matched training points")
        e.add_argument("--n-knn-train", dest="n_knn_train", type=int)
        e.add_argument("--n-knn-test", dest="n_knn_test", type=int)
        e.add_argument("--neighbors", type=int)
        e.add_argument("--weights", nargs="+", help="SGM weights for modalities 1 and 2")
        e.add_argument("--seed", type=int)
        e.add_argument("--out", help="results CSV (default: standard output)")
        e.add_argument("--json", help="also write results and config as JSON")

    i = sub.add_parser("inspect", help="print the header of a model file")
    i.add_argument("--model", required=True)
    return p


def _covariances(paths, m, k):
    if not paths:
        return None
    if len(paths) != m + 1:
        raise UsageError(f"--cov needs {m + 1} entries, got {len(paths)}")
    return [
        PrescribedCovariance.identity(k) if p == "identity" else PrescribedCovariance.from_matrix(load_matrix(p))
        for p in paths
    ]


def cmd_train(args):
    resolve(args, "k", "tol", "max_iters", "weights")
    m = len(args.data) - 1
    if m < 1:
        raise UsageError("--data needs at least two files")
    weights = parse_floats(args.weights)
    if weights is None:
        if m > 1:
            raise UsageError(f"--weights is required with {m} non-central modalities")
        weights = [1.0]
    if args.cov and len(args.cov) != m + 1:
        raise UsageError(f"--cov needs {m + 1} entries, got {len(args.cov)}")
    config = SgmConfig(k=int(args.k), weights=tuple(weights), rel_tol=float(args.tol),
                       max_outer_iters=int(args.max_iters))
    data = [load_matrix(p).T for p in args.data]
    model = train(data, _covariances(args.cov, m, config.k), config)
    save_model(args.out, model)
    print(f"m = {model.m}")
    print(f"k = {model.k}")
    print("r_min = " + " ".join(str(r) for r in model.r_min))
    print(f"trace_ratio = {_FLOAT(model.trace_ratio)}")
    print(f"refine_iters = {model.refine_iters}")
    return 0


def cmd_apply(args):
    model = load_model(args.model)
    if not 0 <= args.modality <= model.m:
        raise ValueError(f"modality must be in [0, {model.m}], got {args.modality}")
    X = load_matrix(args.data, expected_cols=model.dims[args.modality])
    text = format_matrix(apply(model, args.modality, X.T).T)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _experiment_base(args, method, k):
    weights = parse_floats(args.weights) or [0.2, 0.8]
    return ExperimentSpec(
        method=method,
        n=int(args.n),
        k=int(k),
        n_knn_train=int(args.n_knn_train),
        n_knn_test=int(args.n_knn_test),
        weights=tuple(weights),
        seed=int(args.seed),
        neighbors=int(args.neighbors),
    )


def _emit(args, results, config):
    text = results_csv(results)
    if args.out:
        Path(args.out).write_text(text)
        print(f"{'method':<8} {'k':>4} {'n':>4} {'accuracy':>10} {'T':>10}")
        for r in results:
            T = "" if r.trace_ratio is None else f"{r.trace_ratio:.4f}"
            print(f"{r.method:<8} {r.k:>4} {r.n:>4} {r.accuracy:>10.4f} {T:>10}")
    else:
        sys.stdout.write(text)
    if args.json:
        Path(args.json).write_text(results_json(results, config))


def _common_keys():
    return ("n", "seed", "n_knn_train", "n_knn_test", "neighbors", "weights")


def cmd_experiment(args):
    resolve(args, "method", "k", *_common_keys())
    parse_methods(args.method)
    spec = _experiment_base(args, args.method, args.k)
    tiles = tile(load_images(args.images, args.labels))
    t0 = time.perf_counter()
    result = run_experiment(spec, tiles)
    _emit(args, [result], {"spec": vars(spec) | {"weights": list(spec.weights)},
                           "seconds": time.perf_counter() - t0})
    return 0


def cmd_sweep(args):
    resolve(args, "methods", "k", "workers", *_common_keys())
    methods = parse_methods(args.methods)
    ks = parse_ints(args.k)
    base = _experiment_base(args, methods[0], ks[0])
    tiles = tile(load_images(args.images, args.labels))
    t0 = time.perf_counter()
    results = sweep(base, ks, methods, tiles, workers=int(args.workers))
    config = {"methods": methods, "k": ks, "n": base.n, "n_knn_train": base.n_knn_train,
              "n_knn_test": base.n_knn_test, "neighbors": base.neighbors,
              "weights": list(base.weights), "seed": base.seed,
              "seconds": time.perf_counter() - t0}
    _emit(args, results, config)
    return 0


def cmd_inspect(args):
    model = load_model(args.model)
    print(f"m = {model.m}")
    print(f"k = {model.k}")
    print("dims = " + " ".join(str(d) for d in model.dims))
    print("r_min = " + " ".join(str(r) for r in model.r_min))
    print("weights = " + " ".join(_FLOAT(w) for w in model.config.weights))
    print(f"trace_ratio = {_FLOAT(model.trace_ratio)}")
    print(f"refine_iters = {model.refine_iters}")
    print(f"refine_flips = {model.refine_flips}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "apply": cmd_apply,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
    "inspect": cmd_inspect,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
