"""Multinomial logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LogisticConfig:
    learning_rate: float = 0.5
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass(eq=False)
class LogisticModel:
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray  # (classes,)
    n_classes: int


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def fit_logistic(
    x: np.ndarray, labels: np.ndarray, n_classes: int | None = None,
    config: LogisticConfig | None = None,
) -> LogisticModel:
    """Softmax regression with L2 on the weights (bias unregularized).

    Weights start at zero, so the fit is deterministic regardless of seed.
    """
    config = config or LogisticConfig()
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if x.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("features contain NaN or infinite values")
    if len(labels) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows but {len(labels)} labels")
    present = np.unique(labels)
    if n_classes is None:
        n_classes = int(present.max()) + 1
    if len(present) < 2:
        raise ValueError("need at least 2 classes to fit a classifier")
    if present.min() < 0 or present.max() >= n_classes:
        raise ValueError("labels out of range for n_classes")

    n, d = x.shape
    w = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    y = np.zeros((n, n_classes))
    y[np.arange(n), labels] = 1.0
    for _ in range(config.epochs):
        p = softmax(x @ w.T + b)
        g = (p - y) / n
        w -= config.learning_rate * (g.T @ x + config.l2 * w)
        b -= config.learning_rate * g.sum(axis=0)
    return LogisticModel(weights=w, bias=b, n_classes=n_classes)


def predict_proba(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    p = softmax(x @ model.weights.T + model.bias)
    return p[0] if single else p


def predict(model: LogisticModel, x: np.ndarray) -> np.ndarray:
    p = predict_proba(model, x)
    return np.argmax(p, axis=-1)
