"""Command-line entry point: ``greedy-rls {select,predict,cv,benchmark,generate}``.

Exit codes: 0 success, 1 invalid flags, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .dataset import (
    Dataset,
    load_csv,
    load_libsvm,
    standardize,
    stratified_folds,
    synth_two_gaussians,
    libsvm_text,
)
from .errors import DataError, NumericalError
from .evaluation import (
    ALGORITHMS,
    SCHEMA_VERSION,
    cv_feature_curve,
    grid_search_lambda,
    iter_random,
    scaling_benchmark,
)
from .greedy import SelectionTrace, select_greedy
from .baselines import select_lowrank, select_wrapper
from .losses import LossFunction
from .rls import RlsModel, predict

THREADS_ENV = "GREEDY_RLS_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list:
    """``pow2:LO:HI`` for 2^LO..2^HI, or a comma-separated list of values."""
    text = text.strip()
    if text.startswith("pow2:"):
        try:
            _, lo, hi = text.split(":")
            lo, hi = int(lo), int(hi)
        except ValueError:
            raise UsageError(f"bad grid spec {text!r}; expected pow2:LO:HI") from None
        if lo > hi:
            raise UsageError(f"empty grid {text!r}")
        return [2.0**p for p in range(lo, hi + 1)]
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise UsageError("grid values must be positive")
    return vals


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# ---------------------------------------------------------------------------
# data handling


def _load(args, n_features=None) -> Dataset:
    fmt = args.format or ("csv" if str(args.input).endswith(".csv") else "libsvm")
    if fmt == "csv":
        return load_csv(args.input, getattr(args, "label_column", None))
    return load_libsvm(args.input, n_features=n_features or getattr(args, "n_features", None),
                       positive_class=getattr(args, "positive_class", None))


def _config_echo(args) -> dict:
    # output destinations are left out so reruns to other paths stay byte-identical
    skip = ("func", "threads", "out", "csv_out")
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _check_common(args) -> None:
    if getattr(args, "threads", 1) < 1:
        raise UsageError("--threads must be at least 1")
    if getattr(args, "format", None) == "csv" and getattr(args, "label_column", None) is None \
            and args.command in ("select", "cv"):
        raise UsageError("--format csv requires --label-column")


# ---------------------------------------------------------------------------
# subcommands


def cmd_select(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    if args.lambda_ is not None and not args.lambda_ > 0:
        raise UsageError("--lambda must be positive")
    grid = parse_grid(args.grid) if args.grid else None
    if args.debug_recompute_interval is not None and args.debug_recompute_interval < 1:
        raise UsageError("--debug-recompute-interval must be positive")
    if args.debug_recompute_interval is not None and args.algorithm != "greedy":
        raise UsageError("--debug-recompute-interval applies to the greedy algorithm only")
    loss = LossFunction(args.loss)

    data = _load(args)
    n_input = data.n_features
    prep = {"add_bias": bool(args.add_bias), "standardize": None}
    if args.standardize:
        mean, scale, data = standardize(data)
        prep["standardize"] = {"mean": mean.tolist(), "scale": scale.tolist()}
    if args.add_bias:
        data = data.with_bias()
    if loss is LossFunction.ZERO_ONE:
        _check_binary(data)

    lam = args.lambda_ if args.lambda_ is not None else (
        grid_search_lambda(data, grid, loss) if grid else 1.0)
    if args.algorithm == "greedy":
        trace = select_greedy(data, lam, args.k, loss, n_jobs=args.threads,
                              check_every=args.debug_recompute_interval)
    elif args.algorithm == "lowrank":
        trace = select_lowrank(data, lam, args.k, loss)
    elif args.algorithm == "wrapper":
        trace = select_wrapper(data, lam, args.k, loss)
    else:
        steps = list(iter_random(data, lam, min(args.k, data.n_features), loss, seed=args.seed))
        model = RlsModel(tuple(s.feature for s in steps), steps[-1].weights, lam)
        trace = SelectionTrace(steps, model, loss, args.k)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": _config_echo(args),
        "algorithm": args.algorithm,
        "n_features": n_input,
        "preprocessing": prep,
    }
    doc.update(trace.to_dict())
    _emit(args.out, _dumps(doc))
    if trace.shortfall:
        print(f"note: only {len(trace.steps)} features available, {trace.shortfall} short of --k",
              file=sys.stderr)
    return 0


def _check_binary(data: Dataset) -> None:
    if not data.is_binary():
        raise DataError("zero_one loss requires labels in {-1, +1}")


def _read_model(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such model file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    body = doc.get("model", doc)
    try:
        model = RlsModel.from_dict(body)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a model ({exc})") from None
    return model, doc.get("preprocessing") or {}, doc.get("n_features")


def cmd_predict(args) -> int:
    model, prep, n_input = _read_model(args.model)
    data = _load(args, n_features=n_input)
    X = data.features
    if n_input is not None and X.shape[0] != n_input:
        raise DataError(f"model expects {n_input} input features, data has {X.shape[0]}")
    st = prep.get("standardize")
    if st:
        X = (X - np.asarray(st["mean"])[:, None]) / np.asarray(st["scale"])[:, None]
    if prep.get("add_bias"):
        X = np.vstack([X, np.ones((1, X.shape[1]))])
    try:
        p = predict(model, X)
    except IndexError as exc:
        raise DataError(str(exc)) from None

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.threshold is None:
        w.writerow(["prediction"])
        w.writerows([repr(float(v))] for v in p)
    else:
        w.writerow(["prediction", "label"])
        w.writerows([repr(float(v)), 1 if v > args.threshold else -1] for v in p)
    _emit(args.out, buf.getvalue())
    return 0


def cmd_cv(args) -> int:
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be at least 1")
    grid = parse_grid(args.grid)
    data = _load(args)
    if args.add_bias:
        data = data.with_bias()
    _check_binary(data)
    k = args.k if args.k is not None else data.n_features
    if k > data.n_features:
        raise DataError(f"--k {k} exceeds the {data.n_features} available features")
    folds = stratified_folds(data.labels, args.folds, args.seed)
    report = cv_feature_curve(data, k, folds, grid, args.algorithm, args.loss,
                              seed=args.seed, standardize=args.standardize, n_jobs=args.threads)
    doc = {"version": __version__, "config": _config_echo(args)}
    doc.update(report.to_dict())
    _emit(args.out, _dumps(doc))
    if args.csv_out:
        write_atomic(args.csv_out, report.to_csv())
    return 0


def cmd_benchmark(args) -> int:
    ms = _int_list(args.m)
    if not ms:
        raise UsageError("--m needs at least one value")
    if any(m < 2 or m % 2 for m in ms):
        raise UsageError("every --m value must be a positive even number")
    algs = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    if not algs or any(a not in ("greedy", "lowrank", "wrapper") for a in algs):
        raise UsageError(f"--algorithms must list greedy, lowrank, wrapper; got {args.algorithms!r}")
    if args.n < 1 or args.k < 1 or args.repeats < 1:
        raise UsageError("--n, --k and --repeats must be positive")
    if "lowrank" in algs and max(ms) > args.max_lowrank_m:
        raise UsageError(
            f"refusing lowrank at m={max(ms)}: its m x m matrix exceeds the ceiling "
            f"--max-lowrank-m {args.max_lowrank_m}"
        )
    report = scaling_benchmark(ms, args.n, args.k, algs, seed=args.seed, repeats=args.repeats,
                               n_informative=args.informative, lam=args.lambda_,
                               lowrank_max_m=args.max_lowrank_m)
    doc = {"version": __version__, "config": _config_echo(args)}
    doc.update(report.to_dict())
    _emit(args.out, _dumps(doc))
    if args.csv_out:
        write_atomic(args.csv_out, report.to_csv())
    return 0


def cmd_generate(args) -> int:
    try:
        data = synth_two_gaussians(args.m, args.n, args.informative, args.separation, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args.out, libsvm_text(data))
    return 0


# ---------------------------------------------------------------------------


def _data_flags(p, labels=True):
    p.add_argument("--in", dest="input", required=True, help="input data file")
    p.add_argument("--format", choices=("libsvm", "csv"),
                   help="input format (default: from extension, else libsvm)")
    p.add_argument("--label-column", help="CSV label column name or index")
    p.add_argument("--n-features", type=int, help="LibSVM feature count (default: max index)")
    if labels:
        p.add_argument("--positive-class", type=float,
                       help="map this label to +1 and every other label to -1")


def build_parser() -> argparse.ArgumentParser:
    default_threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    parser = _Parser(prog="greedy-rls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="select features and write a selection trace")
    _data_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="greedy")
    lam = p.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lambda_", type=float, help="regularization (default 1)")
    lam.add_argument("--grid", help="pick lambda by LOO over a grid, e.g. pow2:-15:15")
    p.add_argument("--k", type=int, required=True, help="number of features to select")
    p.add_argument("--loss", choices=[l.value for l in LossFunction], default="squared")
    p.add_argument("--seed", type=int, default=0, help="seed for --algorithm random")
    p.add_argument("--add-bias", action="store_true", help="append a constant-1 feature")
    p.add_argument("--standardize", action="store_true", help="zero-mean/unit-variance features")
    p.add_argument("--debug-recompute-interval", type=int,
                   help="recompute the greedy state from scratch every N commits and check drift")
    p.add_argument("--threads", type=int, default=default_threads)
    p.add_argument("--out", help="trace JSON path (default: stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("predict", help="apply a trained model to a data file")
    _data_flags(p, labels=False)
    p.add_argument("--model", required=True, help="selection trace or model JSON")
    p.add_argument("--threshold", type=float, help="also emit +-1 labels: +1 if prediction > T")
    p.add_argument("--out", help="predictions CSV path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="cross-validated accuracy vs number of selected features")
    _data_flags(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="greedy")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--grid", default="pow2:-15:15")
    p.add_argument("--k", type=int, help="largest number of features (default: all)")
    p.add_argument("--loss", choices=[l.value for l in LossFunction], default="zero_one")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--add-bias", action="store_true")
    p.add_argument("--standardize", action="store_true",
                   help="standardize with training-fold statistics")
    p.add_argument("--threads", type=int, default=default_threads)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--csv-out", help="also write a tidy CSV (one row per fold and k)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("benchmark", help="time selection on synthetic data of growing size")
    p.add_argument("--algorithms", default="greedy")
    p.add_argument("--m", required=True, help="comma-separated example counts")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--informative", type=int, help="informative features (default: min(50, n))")
    p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-lowrank-m", type=int, default=5000)
    p.add_argument("--threads", type=int, default=default_threads)
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--csv-out", help="also write a tidy CSV (one row per timing cell)")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("generate", help="write two-Gaussian synthetic data as LibSVM")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--informative", type=int, required=True)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        _check_common(args)
        with threadpool_limits(limits=getattr(args, "threads", 1)):
            return args.func(args)
    except UsageError as exc:
        print(f"greedy-rls: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, IndexError) as exc:
        print(f"greedy-rls: data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"greedy-rls: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"greedy-rls: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
