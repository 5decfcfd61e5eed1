"""Slow reference selectors: the black-box LOO wrapper and the low-rank
updated LS-SVM. Both choose exactly the same features as greedy RLS and are
used to check it and to benchmark against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .dataset import Dataset
from .errors import NumericalError
from .greedy import DENOM_EPS, SelectionTrace, Step
from .losses import ArgminTracker, as_loss
from .rls import RlsModel, _check_lambda, fit_weights

__all__ = [
    "DualState",
    "smw_update",
    "iter_wrapper",
    "select_wrapper",
    "iter_lowrank",
    "select_lowrank",
]


def _validate(dataset: Dataset, lam: float, k: int, loss):
    loss = as_loss(loss)
    lam = _check_lambda(lam)
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    loss.check_labels(dataset.labels)
    return lam, loss


# ---------------------------------------------------------------------------
# Wrapper


def wrapper_loo(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """LOO predictions by m full retrainings on the rows of ``X``."""
    m = X.shape[1]
    keep = np.ones(m, dtype=bool)
    p = np.empty(m)
    for j in range(m):
        keep[j] = False
        w = fit_weights(X[:, keep], y[keep], lam)
        keep[j] = True
        p[j] = w @ X[:, j]
    return p


def iter_wrapper(dataset: Dataset, lam: float, k: int, loss="squared") -> Iterator[Step]:
    lam, loss = _validate(dataset, lam, k, loss)
    X, y = dataset.features, dataset.labels
    n = dataset.n_features
    selected = []
    for _ in range(min(k, n)):
        tracker = ArgminTracker()
        best_p = None
        for i in range(n):
            if i in selected:
                continue
            p = wrapper_loo(X[selected + [i]], y, lam)
            e = loss.total(y, p)
            if tracker.offer(i, e):
                best_p = p
        selected.append(tracker.best)
        yield Step(
            feature=tracker.best,
            loo_error=tracker.error,
            weights=fit_weights(X[selected], y, lam),
            loo_predictions=best_p,
        )


def select_wrapper(dataset: Dataset, lam: float, k: int, loss="squared") -> SelectionTrace:
    loss = as_loss(loss)
    steps = list(iter_wrapper(dataset, lam, k, loss))
    model = RlsModel(tuple(s.feature for s in steps), steps[-1].weights, lam)
    return SelectionTrace(steps, model, loss, k)


# ---------------------------------------------------------------------------
# Low-rank updated LS-SVM


@dataclass(eq=False)
class DualState:
    dual: np.ndarray
    g: np.ndarray


def smw_update(G: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``(G^{-1} + v v^T)^{-1}`` by Sherman-Morrison in O(m^2).

    Evaluated as ``G - (G v) (1 + v^T G v)^{-1} (v^T G)``, products taken in
    that bracket order.
    """
    Gv = G @ v
    den = 1.0 + v @ Gv
    if not den > DENOM_EPS:
        raise NumericalError(f"degenerate rank-one update: 1 + v^T G v = {den!r}")
    vG = v @ G
    return G - np.outer(Gv / den, vG)


def iter_lowrank(
    dataset: Dataset, lam: float, k: int, loss="squared", on_commit=None
) -> Iterator[Step]:
    """Yield steps of the low-rank updated selector.

    ``on_commit``, if given, is called with the :class:`DualState` after each
    permanent update.
    """
    lam, loss = _validate(dataset, lam, k, loss)
    X, y = dataset.features, dataset.labels
    n, m = X.shape
    state = DualState(dual=y / lam, g=np.eye(m) / lam)
    selected = []
    for _ in range(min(k, n)):
        tracker = ArgminTracker()
        best_p = None
        for i in range(n):
            if i in selected:
                continue
            Gt = smw_update(state.g, X[i])
            at = Gt @ y
            dt = np.diagonal(Gt)
            if np.any(dt <= 0):
                raise NumericalError(f"non-positive diagonal of G for feature {i}")
            p = y - at / dt
            if tracker.offer(i, loss.total(y, p)):
                best_p = p
        b = tracker.best
        state.g = smw_update(state.g, X[b])
        state.dual = state.g @ y
        selected.append(b)
        if on_commit is not None:
            on_commit(state)
        yield Step(
            feature=b,
            loo_error=tracker.error,
            weights=X[selected] @ state.dual,
            loo_predictions=best_p,
        )


def select_lowrank(dataset: Dataset, lam: float, k: int, loss="squared") -> SelectionTrace:
    loss = as_loss(loss)
    steps = list(iter_lowrank(dataset, lam, k, loss))
    model = RlsModel(tuple(s.feature for s in steps), steps[-1].weights, lam)
    return SelectionTrace(steps, model, loss, k)
