"""Experiment protocols: lambda grid search, cross-validated feature curves,
the random-selection baseline, and the runtime scaling benchmark."""

from __future__ import annotations

import csv
import gc
import io
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np

from .baselines import iter_lowrank, iter_wrapper
from .dataset import Dataset, FoldAssignment, standardize as _standardize, synth_two_gaussians
from .errors import DataError
from .greedy import Step, iter_greedy
from .losses import LossFunction, as_loss
from .rls import _check_lambda, fit_with_loo, loo_dual, loo_primal, train_dual

__all__ = [
    "DEFAULT_GRID",
    "SCHEMA_VERSION",
    "CurveReport",
    "ScalingReport",
    "accuracy",
    "grid_search_lambda",
    "iter_random",
    "get_selector",
    "cv_feature_curve",
    "random_baseline",
    "scaling_benchmark",
]

SCHEMA_VERSION = 1
DEFAULT_GRID = tuple(2.0**p for p in range(-15, 16))


def accuracy(predictions, labels) -> float:
    """Fraction of examples with ``y * p > 0``; a zero prediction is wrong."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions for {y.size} labels")
    if y.size == 0:
        raise ValueError("empty input")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("accuracy requires labels in {-1, +1}")
    return float(np.count_nonzero(y * p > 0)) / y.size


def grid_search_lambda(dataset: Dataset, grid: Sequence[float], loss="zero_one") -> float:
    """Lambda with the lowest full-feature LOO loss; ties go to the smallest."""
    loss = as_loss(loss)
    grid = sorted(_check_lambda(g) for g in grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if len(grid) == 1:
        return grid[0]
    y = dataset.labels
    everything = list(range(dataset.n_features))
    use_primal = dataset.n_features < dataset.n_examples
    best, best_err = None, math.inf
    for lam in grid:
        if use_primal:
            p = loo_primal(dataset, everything, lam)
        else:
            p = loo_dual(train_dual(dataset, everything, lam)[1], y)
        err = float(loss.total(y, p))
        if err < best_err:
            best, best_err = lam, err
    return best


def iter_random(
    dataset: Dataset, lam: float, k: int, loss="zero_one", seed: int = 0
) -> Iterator[Step]:
    """Features in a uniformly random order; a model is trained per prefix."""
    loss = as_loss(loss)
    n = dataset.n_features
    if k > n:
        raise ValueError(f"cannot draw {k} of {n} features")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)[:k]
    for j in range(k):
        model, p = fit_with_loo(dataset, order[: j + 1], lam)
        yield Step(
            feature=int(order[j]),
            loo_error=float(loss.total(dataset.labels, p)),
            weights=np.asarray(model.weights),
            loo_predictions=p,
        )


_SELECTORS: Dict[str, Callable] = {
    "greedy": iter_greedy,
    "lowrank": iter_lowrank,
    "wrapper": iter_wrapper,
}
ALGORITHMS = tuple(_SELECTORS) + ("random",)


def get_selector(name: str) -> Callable:
    try:
        return _SELECTORS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted(_SELECTORS)}") from None


@dataclass
class CurveReport:
    algorithm: str
    loss: str
    k_values: List[int]
    mean_test_accuracy: List[float]
    mean_loo_accuracy: List[float]
    per_fold_test: List[List[float]]
    per_fold_loo: List[List[float]]
    lambda_per_fold: List[float]
    features_per_fold: List[List[int]]
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "algorithm": self.algorithm,
            "loss": self.loss,
            "seed": self.seed,
            "k_values": self.k_values,
            "mean_test_accuracy": self.mean_test_accuracy,
            "mean_loo_accuracy": self.mean_loo_accuracy,
            "per_fold": {"test_accuracy": self.per_fold_test, "loo_accuracy": self.per_fold_loo},
            "lambda_per_fold": self.lambda_per_fold,
            "features_per_fold": self.features_per_fold,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "algorithm", "fold", "k", "lambda",
                    "feature", "test_accuracy", "loo_accuracy"])
        for f, lam in enumerate(self.lambda_per_fold):
            for j, k in enumerate(self.k_values):
                w.writerow([SCHEMA_VERSION, self.algorithm, f, k, repr(lam),
                            self.features_per_fold[f][j],
                            repr(self.per_fold_test[f][j]), repr(self.per_fold_loo[f][j])])
        return buf.getvalue()


def cv_feature_curve(
    dataset: Dataset,
    k_max: int,
    folds: FoldAssignment,
    grid: Sequence[float] = DEFAULT_GRID,
    algorithm: str = "greedy",
    loss="zero_one",
    seed: int = 0,
    standardize: bool = False,
    n_jobs: int = 1,
) -> CurveReport:
    """Test and LOO accuracy after each selection step, per CV fold.

    On every fold lambda is picked by :func:`grid_search_lambda` on the
    training part with all features and then held fixed while selecting.
    The model after step k is the selector's own (``w = X_S a``).
    """
    loss = as_loss(loss)
    if not dataset.is_binary():
        raise DataError("cross-validated accuracy curves need labels in {-1, +1}")
    if not 1 <= k_max <= dataset.n_features:
        raise ValueError(f"k_max must be in [1, {dataset.n_features}], got {k_max}")
    if folds.fold_of_example.size != dataset.n_examples:
        raise ValueError("fold assignment does not match the number of examples")
    if algorithm != "random":
        select = get_selector(algorithm)

    per_test, per_loo, lams, feats = [], [], [], []
    for f in range(folds.k_folds):
        tr_idx, te_idx = folds.split(f)
        train, test = dataset.take_examples(tr_idx), dataset.take_examples(te_idx)
        if standardize:
            _, _, train, test = _standardize(train, test)
        lam = grid_search_lambda(train, grid, loss)
        if algorithm == "random":
            steps = iter_random(train, lam, k_max, loss, seed=_fold_seed(seed, f))
        elif algorithm == "greedy":
            steps = select(train, lam, k_max, loss, n_jobs=n_jobs)
        else:
            steps = select(train, lam, k_max, loss)
        test_row, loo_row, chosen = [], [], []
        for step in steps:
            chosen.append(step.feature)
            p = step.weights @ test.features[chosen]
            test_row.append(accuracy(p, test.labels))
            loo_row.append(accuracy(step.loo_predictions, train.labels))
        per_test.append(test_row)
        per_loo.append(loo_row)
        lams.append(lam)
        feats.append(chosen)

    return CurveReport(
        algorithm=algorithm,
        loss=loss.value,
        k_values=list(range(1, k_max + 1)),
        mean_test_accuracy=[float(v) for v in np.mean(per_test, axis=0)],
        mean_loo_accuracy=[float(v) for v in np.mean(per_loo, axis=0)],
        per_fold_test=per_test,
        per_fold_loo=per_loo,
        lambda_per_fold=lams,
        features_per_fold=feats,
        seed=seed if algorithm == "random" else None,
    )


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def random_baseline(
    dataset: Dataset,
    k: int,
    seed: int,
    folds: FoldAssignment,
    grid: Sequence[float] = DEFAULT_GRID,
    loss="zero_one",
    standardize: bool = False,
) -> CurveReport:
    if k > dataset.n_features:
        raise ValueError(f"k={k} exceeds the {dataset.n_features} available features")
    return cv_feature_curve(dataset, k, folds, grid, "random", loss, seed=seed,
                            standardize=standardize)


# ---------------------------------------------------------------------------
# Scaling benchmark


@dataclass
class ScalingReport:
    rows: List[tuple] = field(default_factory=list)
    slopes: Dict[str, Optional[float]] = field(default_factory=dict)
    skipped: List[dict] = field(default_factory=list)

    def wall(self, algorithm: str, m: int) -> float:
        for alg, mm, _, _, t in self.rows:
            if alg == algorithm and mm == m:
                return t
        raise KeyError((algorithm, m))

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "rows": [
                {"algorithm": a, "m": m, "n": n, "k": k, "wall_seconds": t}
                for a, m, n, k, t in self.rows
            ],
            "slopes": self.slopes,
            "skipped": self.skipped,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "algorithm", "m", "n", "k", "wall_seconds"])
        for a, m, n, k, t in self.rows:
            w.writerow([SCHEMA_VERSION, a, m, n, k, repr(t)])
        return buf.getvalue()


def loglog_slope(ms: Sequence[float], times: Sequence[float]) -> Optional[float]:
    if len(set(ms)) < 2:
        return None
    return float(np.polyfit(np.log(ms), np.log(times), 1)[0])


def scaling_benchmark(
    m_values: Sequence[int],
    n: int,
    k: int,
    algorithms: Sequence[str] = ("greedy",),
    seed: int = 0,
    repeats: int = 3,
    n_informative: Optional[int] = None,
    lam: float = 1.0,
    loss="zero_one",
    lowrank_max_m: int = 5000,
) -> ScalingReport:
    """Time full selection runs on two-Gaussian data for each m.

    Each cell is the median wall time of ``repeats`` runs of the selection
    call alone. Runs that exhaust memory are listed under ``skipped``.
    """
    if not m_values:
        raise ValueError("no m values given")
    for a in algorithms:
        if a not in _SELECTORS:
            raise ValueError(f"unknown algorithm {a!r}")
    if "lowrank" in algorithms and max(m_values) > lowrank_max_m:
        raise ValueError(
            f"lowrank needs O(m^2) memory; m={max(m_values)} exceeds the ceiling {lowrank_max_m}"
        )
    n_inf = n_informative if n_informative is not None else min(50, n)
    report = ScalingReport()
    for m in m_values:
        data = synth_two_gaussians(m, n, n_inf, 1.0, seed)
        for a in algorithms:
            select = _SELECTORS[a]
            try:
                times = []
                for _ in range(repeats):
                    gc.collect()
                    t0 = time.perf_counter()
                    for _step in select(data, lam, k, loss):
                        pass
                    times.append(time.perf_counter() - t0)
            except MemoryError:
                report.skipped.append({"algorithm": a, "m": m, "reason": "out of memory"})
                continue
            report.rows.append((a, m, n, k, statistics.median(times)))
        del data
    for a in algorithms:
        pts = [(r[1], r[4]) for r in report.rows if r[0] == a]
        report.slopes[a] = loglog_slope([p[0] for p in pts], [p[1] for p in pts])
    return report
