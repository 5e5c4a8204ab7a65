"""Small linear models used by the formulators: logistic, linear large-margin and ridge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from quboml.errors import DegenerateLabelsError, DegenerateModelError, DimensionError


@dataclass(frozen=True)
class LinearModel:
    """Linear score ``X @ weights + bias`` in the raw (unstandardized) feature space."""

    weights: np.ndarray
    bias: float
    kind: str

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weights.shape[0]:
            raise DimensionError(f"expected {self.weights.shape[0]} features, got {X.shape[1]}")
        return X @ self.weights + self.bias

    predict = decision


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y).astype(np.float64).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if y.size < 2 or y.min() == y.max():
        raise DegenerateLabelsError("both classes must be present")
    return y


def _standardize(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (X - mean) / std, mean, std


def _unstandardize(w, b, mean, std):
    w_raw = w / std
    return w_raw, float(b - w_raw @ mean)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(w, b, X, y, l2):
    """Mean log loss plus ``l2/2 * ||w||^2``; returns ``(loss, grad_w, grad_b)``."""
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    r = sigmoid(z) - y
    return float(loss), X.T @ r / len(y) + l2 * w, float(r.mean())


def fit_logistic(X, y, l2: float = 1e-2, epochs: int = 5000, seed: int = 0, tol: float = 1e-6) -> LinearModel:
    """L2-regularized logistic regression by full-batch gradient descent on standardized features.

    Starts from zero weights, so ``seed`` has no effect on the result; it is
    accepted for interface symmetry with the stochastic learners.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = _check_binary(y)
    if X.shape[0] != y.shape[0]:
        raise DimensionError("row count mismatch")
    if l2 < 0:
        raise ValueError("l2 must be nonnegative")
    Z, mean, std = _standardize(X)
    n = len(y)
    lipschitz = 0.25 * (np.linalg.norm(Z, 2) ** 2 / n + 1.0) + l2
    step = 1.0 / lipschitz
    w = np.zeros(Z.shape[1])
    b = 0.0
    for _ in range(epochs):
        _, gw, gb = logistic_loss_and_grad(w, b, Z, y, l2)
        if np.sqrt(gw @ gw + gb * gb) < tol:
            break
        w = w - step * gw
        b = b - step * gb
    w_raw, b_raw = _unstandardize(w, b, mean, std)
    return LinearModel(w_raw, b_raw, "logistic")


def predict_proba(m: LinearModel, X) -> np.ndarray:
    return sigmoid(m.decision(X))


def fit_linear_margin(X, y, c: float = 1.0, epochs: int = 50, seed: int = 0) -> LinearModel:
    """Pegasos-style hinge-loss SGD with iterate averaging.

    The regularization is ``lambda = 1 / (c * n)``; sample order is drawn from ``seed``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y01 = _check_binary(y)
    if c <= 0:
        raise ValueError("c must be positive")
    Z, mean, std = _standardize(X)
    # bias folded in as a constant column
    Z = np.hstack([Z, np.ones((Z.shape[0], 1))])
    ys = 2.0 * y01 - 1.0
    n, d = Z.shape
    lam = 1.0 / (c * n)
    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    w_avg = np.zeros(d)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + 1))
            margin = ys[i] * (Z[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * ys[i] * Z[i]
            w_avg += (w - w_avg) / t
    w_raw, b_raw = _unstandardize(w_avg[:-1], w_avg[-1], mean, std)
    return LinearModel(w_raw, b_raw, "hinge")


def margin_distance(m: LinearModel, x) -> np.ndarray | float:
    """Perpendicular distance ``|w.x + b| / ||w||`` to the decision boundary."""
    norm = float(np.linalg.norm(m.weights))
    if norm == 0.0:
        raise DegenerateModelError("zero weight vector has no decision boundary")
    x = np.asarray(x, dtype=np.float64)
    d = np.abs(m.decision(x)) / norm
    return float(d[0]) if x.ndim == 1 else d


def fit_ridge(X, y, l2: float = 1.0) -> LinearModel:
    """Closed-form ridge regression with an unpenalized bias.

    No standardization here: the normal equations are exact, and the raw-space
    identity ``X.T @ (y - yhat) == l2 * w`` holds.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise DimensionError("need matching, nonempty X and y")
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = X - xm
    A = Xc.T @ Xc + l2 * np.eye(X.shape[1])
    rhs = Xc.T @ (y - ym)
    try:
        w = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        w = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return LinearModel(w, float(ym - xm @ w), "ridge")
