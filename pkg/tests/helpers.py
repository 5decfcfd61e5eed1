import numpy as np

from greedy_rls.dataset import Dataset


def random_dataset(rng, n, m, binary=True):
    X = rng.standard_normal((n, m))
    if binary:
        y = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    else:
        y = rng.standard_normal(m)
    return Dataset(X, y)


def direct_weights(X, y, lam):
    """Ridge weights from the normal equations built by explicit products."""
    A = X @ X.T + lam * np.eye(X.shape[0])
    return np.linalg.solve(A, X @ y)


def direct_g(X, lam):
    """(X^T X + lam I)^{-1} by dense inversion; X may have zero rows."""
    m = X.shape[1]
    return np.linalg.inv(X.T @ X + lam * np.eye(m))


def naive_loo(X, y, lam):
    """LOO predictions by explicit retraining with numpy.linalg.solve."""
    m = X.shape[1]
    out = np.empty(m)
    for j in range(m):
        keep = np.arange(m) != j
        out[j] = direct_weights(X[:, keep], y[keep], lam) @ X[:, j]
    return out
