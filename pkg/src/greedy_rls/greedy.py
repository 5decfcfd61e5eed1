"""Greedy forward selection for RLS with the leave-one-out criterion, O(kmn).

The working state keeps the dual vector ``a = G y``, the diagonal ``d`` of
``G = (X_S^T X_S + lam I)^{-1}`` and the cache ``C = G X^T``. Adding feature
``i`` (values ``v = X_i``) is a rank-one change of ``G``; with the cache, the
updated ``a`` and ``d`` cost O(m) per candidate:

    u  = C[:, i] / (1 + v . C[:, i])
    a' = a - u (v . a)
    d' = d - u * C[:, i]

and the LOO prediction for example j is ``y_j - a'_j / d'_j``. Committing a
feature also updates the cache, ``C <- C - u (v^T C)``, in O(mn).

The cache is stored transposed (``n x m``), so each candidate's column is a
contiguous row.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np
from scipy.linalg import blas

from .dataset import Dataset
from .errors import NumericalError
from .losses import ArgminTracker, LossFunction, as_loss
from .rls import RlsModel, _check_lambda, train_dual

__all__ = [
    "SelectionState",
    "Step",
    "SelectionTrace",
    "init_state",
    "evaluate_candidate",
    "commit_feature",
    "iter_greedy",
    "select_greedy",
]

DENOM_EPS = 1e-12
DRIFT_TOL = 1e-6
# elements per candidate block; keeps the working set cache-resident
BLOCK_ELEMENTS = 1 << 16


@dataclass(eq=False)
class SelectionState:
    selected: list
    dual: np.ndarray
    diag: np.ndarray
    cache: np.ndarray
    lam: float

    @property
    def cache_matrix(self) -> np.ndarray:
        """The cache in ``m x n`` orientation (a view)."""
        return self.cache.T


@dataclass(frozen=True)
class Step:
    """One committed feature.

    ``weights`` and ``loo_predictions`` describe the model on the selected
    prefix after this step; they are not serialized.
    """

    feature: int
    loo_error: float
    weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    loo_predictions: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"feature": self.feature, "loo_error": self.loo_error}


@dataclass(frozen=True)
class SelectionTrace:
    steps: List[Step]
    model: RlsModel
    loss: LossFunction
    requested_k: int

    @property
    def features(self) -> List[int]:
        return [s.feature for s in self.steps]

    @property
    def loo_errors(self) -> List[float]:
        return [s.loo_error for s in self.steps]

    @property
    def shortfall(self) -> int:
        return self.requested_k - len(self.steps)

    def to_dict(self) -> dict:
        return {
            "lambda": self.model.lam,
            "loss": self.loss.value,
            "requested_k": self.requested_k,
            "shortfall": self.shortfall,
            "steps": [s.to_dict() for s in self.steps],
            "model": self.model.to_dict(),
        }


def init_state(dataset: Dataset, lam: float) -> SelectionState:
    lam = _check_lambda(lam)
    m = dataset.n_examples
    return SelectionState(
        selected=[],
        dual=dataset.labels / lam,
        diag=np.full(m, 1.0 / lam),
        cache=dataset.features / lam,
        lam=lam,
    )


def _score_block(X, C, a, d, y, loss: LossFunction, first: int):
    """LOO errors and ``u`` vectors for the candidates in rows of ``X``/``C``.

    Row-wise reductions only, so a row's result does not depend on which
    other rows share its block.
    """
    den = 1.0 + np.einsum("ij,ij->i", X, C)
    bad = np.flatnonzero(~(den > DENOM_EPS))
    if bad.size:
        raise NumericalError(
            f"degenerate rank-one update for feature {first + int(bad[0])}: 1 + v.C = {den[bad[0]]!r}"
        )
    U = C / den[:, None]
    va = np.einsum("ij,j->i", X, a)
    A = U * va[:, None]
    np.subtract(a, A, out=A)
    D = U * C
    np.subtract(d, D, out=D)
    bad = np.flatnonzero(~(D > 0).all(axis=1))
    if bad.size:
        raise NumericalError(
            f"non-positive diagonal of G for feature {first + int(bad[0])}; "
            "accumulated roundoff, rebuild the state"
        )
    # LOO prediction y - a'/d'
    np.divide(A, D, out=A)
    np.subtract(y, A, out=A)
    return loss.total(y, A, axis=1), U


def evaluate_candidate(state: SelectionState, dataset: Dataset, i: int, loss="squared"):
    """Score adding feature ``i``; returns ``(loo_error, u)``. State is not modified."""
    loss = as_loss(loss)
    if i in state.selected:
        raise ValueError(f"feature {i} is already selected")
    if not 0 <= i < dataset.n_features:
        raise IndexError(f"feature index {i} out of range")
    errors, U = _score_block(
        dataset.features[i : i + 1], state.cache[i : i + 1],
        state.dual, state.diag, dataset.labels, loss, i,
    )
    return float(errors[0]), U[0]


def _rank_one_downdate(C: np.ndarray, w: np.ndarray, u: np.ndarray) -> None:
    """In place ``C -= outer(w, u)`` for C-ordered ``C``."""
    # C.T is Fortran-ordered, so BLAS updates the buffer without copying
    out = blas.dger(-1.0, u, w, a=C.T, overwrite_a=True)
    if not np.shares_memory(out, C):
        C[...] = out.T


def commit_feature(
    state: SelectionState, dataset: Dataset, b: int, u: Optional[np.ndarray] = None
) -> SelectionState:
    """Add feature ``b`` to the state in place (O(mn)) and return it.

    ``u`` must come from ``evaluate_candidate`` on this exact state; when
    omitted it is recomputed.
    """
    if b in state.selected:
        raise ValueError(f"feature {b} is already selected")
    v = dataset.features[b]
    c = state.cache[b]
    if u is None:
        den = 1.0 + np.einsum("j,j->", v, c)
        if not den > DENOM_EPS:
            raise NumericalError(f"degenerate rank-one update for feature {b}")
        u = c / den
    state.dual -= u * np.dot(v, state.dual)
    state.diag -= u * c
    w = state.cache @ v
    _rank_one_downdate(state.cache, w, u)
    state.selected.append(int(b))
    return state


def _check_drift(state: SelectionState, dataset: Dataset) -> None:
    _, sol = train_dual(dataset, state.selected, state.lam)
    err = max(
        float(np.max(np.abs(sol.dual - state.dual))),
        float(np.max(np.abs(sol.g_diag - state.diag))),
    )
    if err > DRIFT_TOL:
        raise NumericalError(
            f"state drifted from recomputation by {err:.3g} after {len(state.selected)} commits"
        )


def _block_bounds(n: int, m: int):
    rows = max(1, BLOCK_ELEMENTS // max(m, 1))
    return [(s, min(s + rows, n)) for s in range(0, n, rows)]


def iter_greedy(
    dataset: Dataset,
    lam: float,
    k: int,
    loss="squared",
    n_jobs: int = 1,
    check_every: Optional[int] = None,
) -> Iterator[Step]:
    """Yield one :class:`Step` per selected feature, up to ``min(k, n)``.

    ``n_jobs > 1`` scores candidate blocks on a thread pool; the argmin is
    reduced in feature order, so the result does not depend on it.
    ``check_every=r`` recomputes ``a`` and ``d`` from scratch every ``r``
    commits and raises :class:`NumericalError` on drift beyond 1e-6.
    """
    loss = as_loss(loss)
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if check_every is not None and check_every < 1:
        raise ValueError("check_every must be positive")
    loss.check_labels(dataset.labels)
    state = init_state(dataset, lam)
    X, y = dataset.features, dataset.labels
    n, m = X.shape
    blocks = _block_bounds(n, m)
    pool = ThreadPoolExecutor(n_jobs) if n_jobs > 1 else None

    def score(bounds):
        s, e = bounds
        sel = [i for i in state.selected if s <= i < e]
        if len(sel) == e - s:
            return s, np.empty(0, dtype=np.intp), None, None
        errors, U = _score_block(X[s:e], state.cache[s:e], state.dual, state.diag, y, loss, s)
        idx = np.arange(s, e)
        if sel:
            mask = np.ones(e - s, dtype=bool)
            mask[np.asarray(sel) - s] = False
            idx, errors, U = idx[mask], errors[mask], U[mask]
        return s, idx, errors, U

    try:
        for _ in range(min(k, n)):
            tracker = ArgminTracker()
            best_u = None
            results = pool.map(score, blocks) if pool else map(score, blocks)
            for _, idx, errors, U in results:
                if idx.size == 0:
                    continue
                if not np.all(np.isfinite(errors)):
                    bad = int(idx[np.flatnonzero(~np.isfinite(errors))[0]])
                    raise NumericalError(f"non-finite LOO error for feature {bad}")
                if tracker.offer_block(idx, errors):
                    best_u = U[int(np.argmin(errors))].copy()
            b = tracker.best
            commit_feature(state, dataset, b, best_u)
            if check_every is not None and len(state.selected) % check_every == 0:
                _check_drift(state, dataset)
            yield Step(
                feature=b,
                loo_error=tracker.error,
                weights=X[state.selected] @ state.dual,
                loo_predictions=y - state.dual / state.diag,
            )
    finally:
        if pool is not None:
            pool.shutdown()


def select_greedy(
    dataset: Dataset,
    lam: float,
    k: int,
    loss="squared",
    n_jobs: int = 1,
    check_every: Optional[int] = None,
) -> SelectionTrace:
    """Greedy RLS: forward selection by LOO error, final ``w = X_S a``."""
    loss = as_loss(loss)
    steps = list(iter_greedy(dataset, lam, k, loss, n_jobs=n_jobs, check_every=check_every))
    features = [s.feature for s in steps]
    model = RlsModel(tuple(features), steps[-1].weights, lam)
    return SelectionTrace(steps, model, loss, k)
