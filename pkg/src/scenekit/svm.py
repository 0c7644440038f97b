"""Support vector machines: nu one-class SVM (RBF) and one-vs-rest linear SVM.

The one-class solver is pairwise coordinate ascent (SMO) on the nu-formulation
dual: minimize 0.5 a^T K a subject to 0 <= a_i <= 1/(nu n) and sum a = 1.
At the solution at most a nu-fraction of training points score negative and
at least a nu-fraction end up as support vectors.

The linear solver is dual coordinate descent on the hinge-loss problem with
the bias folded in as a constant-one feature; it iterates until the exact
primal-dual gap falls below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np

_SUPPORT_EPS = 1e-12
_JITTER = 1e-8


def rbf_kernel(x: np.ndarray, y: np.ndarray, width: float) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.exp(-np.maximum(d2, 0.0) / (2.0 * width * width))


def median_pairwise_width(x: np.ndarray) -> float:
    """Median heuristic for the Gaussian kernel width (fallback 1.0)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 2:
        return 1.0
    d2 = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(x * x, axis=1)[None, :]
        - 2.0 * (x @ x.T)
    )
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0


@dataclass(eq=False)
class OcSvmModel:
    support_vectors: np.ndarray  # (s, d)
    alpha: np.ndarray  # (s,) positive dual coefficients
    rho: float
    width: float
    nu: float

    def decision(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        k = rbf_kernel(np.atleast_2d(x), self.support_vectors, self.width)
        f = k @ self.alpha - self.rho
        return float(f[0]) if single else f


def fit_ocsvm(
    x: np.ndarray,
    nu: float = 0.1,
    width: float | None = None,
    tol: float = 1e-4,
    max_iter: int = 200_000,
) -> OcSvmModel:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n < 2:
        raise ValueError("one-class SVM needs at least 2 samples")
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if width is None:
        width = median_pairwise_width(x)
    k = rbf_kernel(x, x, width)
    k[np.diag_indices_from(k)] += _JITTER  # guards identical points

    c_box = 1.0 / (nu * n)
    alpha = np.zeros(n)
    full = int(np.floor(nu * n))
    alpha[:full] = c_box
    remainder = 1.0 - full * c_box
    if remainder > 0 and full < n:
        alpha[full] = remainder
    grad = k @ alpha

    for _ in range(max_iter):
        can_up = alpha < c_box - _SUPPORT_EPS
        can_down = alpha > _SUPPORT_EPS
        i = int(np.argmin(np.where(can_up, grad, np.inf)))
        j = int(np.argmax(np.where(can_down, grad, -np.inf)))
        if grad[j] - grad[i] <= tol:
            break
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        if eta <= _JITTER:
            eta = _JITTER
        delta = (grad[j] - grad[i]) / eta
        delta = min(delta, c_box - alpha[i], alpha[j])
        if delta <= 0:
            break
        alpha[i] += delta
        alpha[j] -= delta
        grad += delta * (k[:, i] - k[:, j])
    else:
        warnings.warn("one-class SMO hit the iteration cap before KKT tolerance", stacklevel=2)

    free = (alpha > _SUPPORT_EPS) & (alpha < c_box - _SUPPORT_EPS)
    if free.any():
        rho = float(grad[free].mean())
    else:
        lo = grad[alpha > _SUPPORT_EPS]
        hi = grad[alpha < c_box - _SUPPORT_EPS]
        lo_v = float(lo.max()) if lo.size else float(grad.max())
        hi_v = float(hi.min()) if hi.size else float(grad.min())
        rho = 0.5 * (lo_v + hi_v)

    keep = alpha > _SUPPORT_EPS
    return OcSvmModel(
        support_vectors=x[keep].copy(),
        alpha=alpha[keep].copy(),
        rho=rho,
        width=width,
        nu=nu,
    )


@dataclass(eq=False)
class LinearSvmModel:
    w: np.ndarray  # (d,)
    b: float
    c: float
    gap: float = 0.0  # primal-dual gap achieved at termination

    def decision(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        f = x @ self.w + self.b
        return float(f) if x.ndim == 1 else f


def fit_linear_svm_binary(
    x: np.ndarray,
    y: np.ndarray,
    c: float = 1.0,
    tol: float = 1e-4,
    max_passes: int = 4000,
    seed: int = 0,
) -> LinearSvmModel:
    """Hinge loss + L2 via dual coordinate descent to a primal-dual gap <= tol."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1")
    if len(np.unique(y)) < 2:
        raise ValueError("need both classes present")
    if c <= 0:
        raise ValueError("C must be positive")
    n, d = x.shape
    xt = np.concatenate([x, np.ones((n, 1))], axis=1)  # bias as a constant feature
    q_diag = np.sum(xt * xt, axis=1)
    alpha = np.zeros(n)
    w = np.zeros(d + 1)
    rng = np.random.default_rng(seed)
    gap = np.inf
    for _ in range(max_passes):
        for i in rng.permutation(n):
            g = y[i] * (xt[i] @ w) - 1.0
            if alpha[i] <= 0:
                pg = min(g, 0.0)
            elif alpha[i] >= c:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) < 1e-12:
                continue
            new = min(max(alpha[i] - g / q_diag[i], 0.0), c)
            if new != alpha[i]:
                w += (new - alpha[i]) * y[i] * xt[i]
                alpha[i] = new
        w = xt.T @ (alpha * y)  # resync against incremental drift
        margins = 1.0 - y * (xt @ w)
        primal = 0.5 * float(w @ w) + c * float(np.maximum(margins, 0.0).sum())
        dual = float(alpha.sum()) - 0.5 * float(w @ w)
        gap = primal - dual
        if gap <= tol:
            break
    else:
        warnings.warn(
            f"linear SVM stopped at duality gap {gap:.3g} after {max_passes} passes",
            stacklevel=2,
        )
    return LinearSvmModel(w=w[:-1].copy(), b=float(w[-1]), c=c, gap=float(gap))


def fit_linear_svm_ovr(
    x: np.ndarray,
    labels: np.ndarray,
    n_classes: int | None = None,
    c: float = 1.0,
    tol: float = 1e-4,
    seed: int = 0,
) -> list[LinearSvmModel]:
    """One binary model per class, each trained class-vs-rest."""
    labels = np.asarray(labels, dtype=int)
    present = np.unique(labels)
    if n_classes is None:
        n_classes = int(present.max()) + 1
    if len(present) < 2:
        raise ValueError("need at least 2 classes for one-vs-rest training")
    models = []
    for cls in range(n_classes):
        if not np.any(labels == cls):
            raise ValueError(f"class {cls} has no training samples")
        y = np.where(labels == cls, 1.0, -1.0)
        models.append(fit_linear_svm_binary(x, y, c=c, tol=tol, seed=seed))
    return models
