"""Datasets stored feature-major: row ``i`` holds feature ``i`` across examples.

Loaders for LibSVM sparse text and headed CSV, a two-Gaussian generator, and
stratified fold assignment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError

__all__ = [
    "Dataset",
    "FoldAssignment",
    "load_libsvm",
    "write_libsvm",
    "libsvm_text",
    "load_csv",
    "synth_two_gaussians",
    "stratified_folds",
    "standardize",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``features`` (n x m) and labels ``labels`` (m,).

    Arrays are copied to contiguous float64 and made read-only.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.ndim != 1:
            raise DataError(f"label vector must be 1-D, got shape {y.shape}")
        n, m = X.shape
        if n < 1 or m < 1:
            raise DataError(f"need at least one feature and one example, got {n}x{m}")
        if y.shape[0] != m:
            raise DataError(f"{y.shape[0]} labels for {m} examples")
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite values")
        if not np.all(np.isfinite(y)):
            raise DataError("labels contain non-finite values")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != n:
                raise DataError(f"{len(names)} feature names for {n} features")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return self.features.shape[0]

    @property
    def n_examples(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.feature_names == other.feature_names
        )

    __hash__ = None

    def is_binary(self) -> bool:
        return bool(np.all(np.abs(self.labels) == 1.0))

    def take_examples(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[:, idx], self.labels[idx], self.feature_names)

    def with_bias(self, value: float = 1.0) -> "Dataset":
        """Append a constant feature row (the last feature)."""
        row = np.full((1, self.n_examples), value)
        names = None
        if self.feature_names is not None:
            names = self.feature_names + ("bias",)
        return Dataset(np.vstack([self.features, row]), self.labels, names)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of_example: np.ndarray
    k_folds: int

    def __post_init__(self):
        f = np.asarray(self.fold_of_example, dtype=np.int64)
        if self.k_folds < 1:
            raise ValueError("k_folds must be positive")
        if f.ndim != 1 or f.size == 0:
            raise ValueError("fold_of_example must be a non-empty vector")
        if f.min() < 0 or f.max() >= self.k_folds:
            raise ValueError("fold index out of range")
        if np.unique(f).size != self.k_folds:
            raise ValueError("every fold must be non-empty")
        f = f.copy()
        f.flags.writeable = False
        object.__setattr__(self, "fold_of_example", f)

    def split(self, fold: int):
        """Return ``(train_idx, test_idx)`` for one fold."""
        test = self.fold_of_example == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


# ---------------------------------------------------------------------------
# LibSVM


def _parse_label(tok: str, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise DataError(f"line {lineno}: bad label {tok!r}") from None
    if not math.isfinite(val):
        raise DataError(f"line {lineno}: non-finite label {tok!r}")
    return val


def load_libsvm(
    path: Union[str, Path],
    n_features: Optional[int] = None,
    positive_class: Optional[float] = None,
) -> Dataset:
    """Read a LibSVM/SVMlight text file into a dense Dataset.

    Indices are 1-based on disk and must be strictly increasing within a line.
    With ``positive_class`` set, labels equal to it become +1 and all others -1
    (one-vs-rest reduction of a multiclass file).
    """
    if n_features is not None and n_features < 1:
        raise ValueError("n_features must be positive")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")

    labels = []
    rows, cols, vals = [], [], []
    max_index = 0
    with path.open("r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            labels.append(_parse_label(toks[0], lineno))
            j = len(labels) - 1
            prev = 0
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataError(f"line {lineno}: expected index:value, got {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataError(f"line {lineno}: malformed pair {tok!r}") from None
                if idx < 1:
                    raise DataError(f"line {lineno}: index {idx} is not 1-based")
                if idx <= prev:
                    raise DataError(f"line {lineno}: indices not strictly increasing at {idx}")
                if not math.isfinite(val):
                    raise DataError(f"line {lineno}: non-finite value {val_s!r}")
                if n_features is not None and idx > n_features:
                    raise DataError(
                        f"line {lineno}: index {idx} exceeds n_features={n_features}"
                    )
                prev = idx
                max_index = max(max_index, idx)
                rows.append(idx - 1)
                cols.append(j)
                vals.append(val)

    if not labels:
        raise DataError(f"{path}: no examples")
    n = n_features if n_features is not None else max_index
    if n < 1:
        raise DataError(f"{path}: no features observed; pass n_features")
    X = np.zeros((n, len(labels)))
    X[np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp)] = vals
    y = np.asarray(labels)
    if positive_class is not None:
        y = np.where(y == positive_class, 1.0, -1.0)
    return Dataset(X, y)


def _fmt(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def libsvm_text(dataset: Dataset) -> str:
    """``dataset`` in LibSVM format; zero entries are omitted."""
    X = dataset.features
    lines = []
    for j in range(dataset.n_examples):
        col = X[:, j]
        nz = np.flatnonzero(col)
        parts = [_fmt(dataset.labels[j])]
        parts.extend(f"{i + 1}:{_fmt(col[i])}" for i in nz)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def write_libsvm(dataset: Dataset, path: Union[str, Path]) -> None:
    Path(path).write_text(libsvm_text(dataset))


# ---------------------------------------------------------------------------
# CSV


def load_csv(
    path: Union[str, Path],
    label_column: Union[str, int, None],
) -> Dataset:
    """Read a headed numeric CSV; ``label_column`` is a header name or index.

    Remaining columns become feature rows in their original order. With
    ``label_column=None`` every column is a feature and labels are zero,
    which is only useful for prediction.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        body = [r for r in reader if r and any(c.strip() for c in r)]

    if label_column is None:
        li = None
    elif isinstance(label_column, str) and label_column in header:
        li = header.index(label_column)
    elif isinstance(label_column, int) or label_column.isdigit():
        # a header name wins over a numeric index
        li = int(label_column)
        if not 0 <= li < len(header):
            raise DataError(f"label column index {li} out of range (0..{len(header) - 1})")
    else:
        raise DataError(f"label column {label_column!r} not found in header")

    if not body:
        raise DataError(f"{path}: no data rows")
    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise DataError(
                f"row {r + 2}: expected {len(header)} columns, got {len(row)}"
            )
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"row {r + 2}, column {c + 1} ({header[c]!r}): non-numeric cell {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"row {r + 2}, column {c + 1}: non-finite value {cell!r}")
            values[r, c] = v

    keep = [c for c in range(len(header)) if c != li]
    if not keep:
        raise DataError(f"{path}: no feature columns")
    y = values[:, li] if li is not None else np.zeros(len(body))
    return Dataset(values[:, keep].T, y, [header[c] for c in keep])


# ---------------------------------------------------------------------------
# Synthetic data and folds


def synth_two_gaussians(
    m: int, n: int, n_informative: int, separation: float = 1.0, seed: int = 0
) -> Dataset:
    """Two balanced classes; the first ``n_informative`` features carry signal.

    Informative features have class-conditional means +-separation/2 and unit
    variance, the rest are standard normal noise. Example order is shuffled.
    """
    if m < 2 or m % 2:
        raise ValueError(f"m must be a positive even number, got {m}")
    if n < 1 or not 1 <= n_informative <= n:
        raise ValueError(f"need 1 <= n_informative <= n, got {n_informative}, {n}")
    rng = np.random.default_rng(seed)
    y = np.repeat([1.0, -1.0], m // 2)
    y = y[rng.permutation(m)]
    X = rng.standard_normal((n, m))
    X[:n_informative] += 0.5 * separation * y
    return Dataset(X, y)


def stratified_folds(labels, k_folds: int, seed: int = 0) -> FoldAssignment:
    """Assign examples to ``k_folds`` folds, stratified by class for +-1 labels.

    Within each class examples are shuffled and dealt round-robin, continuing
    from where the previous class stopped so fold sizes stay balanced. Labels
    that are not all +-1 get plain shuffled folds.
    """
    y = np.asarray(labels, dtype=np.float64)
    m = y.size
    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    rng = np.random.default_rng(seed)
    fold = np.empty(m, dtype=np.int64)

    if np.all(np.abs(y) == 1.0):
        offset = 0
        for cls in (-1.0, 1.0):
            idx = np.flatnonzero(y == cls)
            if idx.size == 0:
                continue
            if idx.size < k_folds:
                raise DataError(
                    f"class {cls:+.0f} has {idx.size} examples, fewer than {k_folds} folds"
                )
            idx = idx[rng.permutation(idx.size)]
            fold[idx] = (offset + np.arange(idx.size)) % k_folds
            offset = (offset + idx.size) % k_folds
    else:
        if m < k_folds:
            raise DataError(f"{m} examples cannot fill {k_folds} folds")
        fold[rng.permutation(m)] = np.arange(m) % k_folds
    return FoldAssignment(fold, k_folds)


def standardize(train: Dataset, *others: Dataset):
    """Scale features to zero mean, unit variance using ``train`` statistics.

    Returns ``(mean, scale, train_scaled, *others_scaled)``. Constant features
    (e.g. a bias row) are left as they are.
    """
    mean = train.features.mean(axis=1)
    scale = train.features.std(axis=1)
    const = ~(scale > 0)
    mean[const] = 0.0
    scale[const] = 1.0

    def apply(ds: Dataset) -> Dataset:
        return Dataset((ds.features - mean[:, None]) / scale[:, None], ds.labels, ds.feature_names)

    return (mean, scale, apply(train), *(apply(o) for o in others))
