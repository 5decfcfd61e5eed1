"""Regularized least-squares on a feature subset, with leave-one-out shortcuts.

Notation follows the feature-major layout: ``X_S`` is the ``|S| x m`` block of
selected feature rows, the predictor is ``f(x) = w . x_S``, and the dual
solution is ``a = G y`` with ``G = (X_S^T X_S + lam I)^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .dataset import Dataset
from .errors import NumericalError

__all__ = [
    "RlsModel",
    "DualSolution",
    "train_primal",
    "train_dual",
    "loo_primal",
    "loo_dual",
    "loo_bruteforce",
    "predict",
    "fit_with_loo",
]

LEVERAGE_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class RlsModel:
    selected: tuple
    weights: np.ndarray
    lam: float

    def __post_init__(self):
        sel = tuple(int(i) for i in self.selected)
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if len(set(sel)) != len(sel):
            raise ValueError("selected features contain duplicates")
        if w.size != len(sel):
            raise ValueError(f"{w.size} weights for {len(sel)} selected features")
        if not np.all(np.isfinite(w)):
            raise NumericalError("model weights are not finite")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        w.flags.writeable = False
        object.__setattr__(self, "selected", sel)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lam", float(self.lam))

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "selected": list(self.selected),
            "weights": [float(v) for v in self.weights],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RlsModel":
        return cls(tuple(d["selected"]), np.asarray(d["weights"], dtype=np.float64), d["lambda"])


@dataclass(frozen=True, eq=False)
class DualSolution:
    dual: np.ndarray
    g_diag: np.ndarray


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam > 0 or not np.isfinite(lam):
        raise ValueError(f"lambda must be a positive finite number, got {lam}")
    return lam


def _check_selected(selected: Sequence[int], n: int, allow_empty: bool) -> list:
    sel = [int(i) for i in selected]
    if not sel and not allow_empty:
        raise ValueError("selected feature set is empty")
    if len(set(sel)) != len(sel):
        raise ValueError("selected features contain duplicates")
    for i in sel:
        if not 0 <= i < n:
            raise IndexError(f"feature index {i} out of range for {n} features")
    return sel


def _cholesky(A: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(A, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from None


def _primal_weights(XS: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    # (X_S X_S^T + lam I)^{-1} X_S y, O(|S|^2 m + |S|^3)
    A = XS @ XS.T
    A.flat[:: A.shape[0] + 1] += lam
    L = _cholesky(A)
    return linalg.cho_solve((L, True), XS @ y, check_finite=False)


def _dual_weights(XS: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    # X_S (X_S^T X_S + lam I)^{-1} y, O(m^3 + m^2 |S|)
    K = XS.T @ XS
    K.flat[:: K.shape[0] + 1] += lam
    L = _cholesky(K)
    return XS @ linalg.cho_solve((L, True), y, check_finite=False)


def fit_weights(XS: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Weights for the block ``XS``, choosing the cheaper of the two forms."""
    if XS.shape[0] < XS.shape[1] - 1:
        return _primal_weights(XS, y, lam)
    return _dual_weights(XS, y, lam)


def train_primal(dataset: Dataset, selected: Sequence[int], lam: float) -> RlsModel:
    lam = _check_lambda(lam)
    sel = _check_selected(selected, dataset.n_features, allow_empty=False)
    w = _primal_weights(dataset.features[sel], dataset.labels, lam)
    return RlsModel(tuple(sel), w, lam)


def train_dual(dataset: Dataset, selected: Sequence[int], lam: float):
    """Train through the m x m kernel system; returns ``(model, DualSolution)``.

    An empty ``selected`` is allowed and gives ``a = y / lam``, ``diag(G) = 1 / lam``.
    """
    lam = _check_lambda(lam)
    sel = _check_selected(selected, dataset.n_features, allow_empty=True)
    y = dataset.labels
    m = dataset.n_examples
    XS = dataset.features[sel]
    K = XS.T @ XS if sel else np.zeros((m, m))
    K.flat[:: m + 1] += lam
    L = _cholesky(K)
    a = linalg.cho_solve((L, True), y, check_finite=False)
    # diag(G) = column sums of squares of L^{-1}, since G = L^{-T} L^{-1}
    Linv = linalg.solve_triangular(L, np.eye(m), lower=True, check_finite=False)
    g_diag = np.einsum("ij,ij->j", Linv, Linv)
    model = RlsModel(tuple(sel), XS @ a, lam)
    return model, DualSolution(a, g_diag)


def loo_primal(dataset: Dataset, selected: Sequence[int], lam: float) -> np.ndarray:
    """LOO predictions from f and the leverages q, in O(|S|^2 m + |S|^3)."""
    lam = _check_lambda(lam)
    sel = _check_selected(selected, dataset.n_features, allow_empty=False)
    if dataset.n_examples < 2:
        raise ValueError("leave-one-out needs at least two examples")
    XS = dataset.features[sel]
    y = dataset.labels
    A = XS @ XS.T
    A.flat[:: A.shape[0] + 1] += lam
    L = _cholesky(A)
    w = linalg.cho_solve((L, True), XS @ y, check_finite=False)
    f = w @ XS
    Z = linalg.solve_triangular(L, XS, lower=True, check_finite=False)
    q = np.einsum("ij,ij->j", Z, Z)
    one_minus_q = 1.0 - q
    bad = np.flatnonzero(np.abs(one_minus_q) < LEVERAGE_EPS)
    if bad.size:
        raise NumericalError(f"degenerate leverage for example {int(bad[0])}")
    return (f - q * y) / one_minus_q


def loo_dual(solution: DualSolution, labels) -> np.ndarray:
    g = np.asarray(solution.g_diag, dtype=np.float64)
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise NumericalError("diagonal of G must be strictly positive")
    return np.asarray(labels, dtype=np.float64) - solution.dual / g


def loo_bruteforce(dataset: Dataset, selected: Sequence[int], lam: float) -> np.ndarray:
    """Retrain without each example in turn; the reference for the shortcuts."""
    lam = _check_lambda(lam)
    sel = _check_selected(selected, dataset.n_features, allow_empty=True)
    m = dataset.n_examples
    if m < 2:
        raise ValueError("leave-one-out needs at least two examples")
    out = np.zeros(m)
    if not sel:
        return out
    XS = dataset.features[sel]
    y = dataset.labels
    keep = np.ones(m, dtype=bool)
    for j in range(m):
        keep[j] = False
        w = _primal_weights(XS[:, keep], y[keep], lam)
        keep[j] = True
        out[j] = w @ XS[:, j]
    return out


def predict(model: RlsModel, features) -> np.ndarray:
    """Apply ``f(x) = w . x_S`` to each column of ``features`` (n x t or n,)."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if model.selected and max(model.selected) >= X.shape[0]:
        raise IndexError(
            f"model uses feature {max(model.selected)} but input has {X.shape[0]} features"
        )
    if not model.selected:
        return np.zeros(X.shape[1])
    return model.weights @ X[list(model.selected)]


def fit_with_loo(dataset: Dataset, selected: Sequence[int], lam: float):
    """Train and get LOO predictions, primal when ``|S| < m`` else dual."""
    sel = list(selected)
    if sel and len(sel) < dataset.n_examples:
        return train_primal(dataset, sel, lam), loo_primal(dataset, sel, lam)
    model, sol = train_dual(dataset, sel, lam)
    return model, loo_dual(sol, dataset.labels)
