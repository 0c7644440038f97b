"""Scenario dictionary learning by box-constrained pseudo-boolean factorization.

A binary object-instance matrix ``A`` (m objects x n instances) is factored
as ``A ~ min(W @ H, 1)`` with ``W`` in [0,1]^(m x k) and ``H`` in
[0,1]^(k x n).  The objective combines an IDF-weighted reconstruction term
with binariness penalties on both factors, a group-sparsity term on the
rows of ``H`` used for scenario pruning, and an orthogonality penalty on
the columns of ``W``:

    f = p0 + a1*p1 + a2*p2 + a3*p3 + a4*p4
    p0 = ||Omega o (A - clamp(WH))||_F^2,  clamp(x) = min(x, 1 + 0.01 x)
    p1 = ||H - H o H||_F^2
    p2 = ||W - W o W||_F^2
    p3 = sum_j ||H_{j,.}||_2
    p4 = ||W^T W - diag(W^T W)||_F^2

p0, p1, p2, p4 are squared Frobenius norms so gradients stay smooth; p3 is
kept unsquared so it acts as a group-sparsity (row-selection) term.
Optimization is alternating projected gradient descent with Armijo
backtracking; iterates are clipped to [0, 1] after every step, so accepted
objectives are non-increasing by construction.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, replace

import numpy as np

# min(x, 1 + 0.01 x) switches branches at x = 1/0.99
CLAMP_CROSSOVER = 1.0 / 0.99
_MIN_STEP = 1e-14
_MAX_STEP = 1e3


def clamp(x):
    """Soft cap of the Boolean product: x below 1/0.99, else 1 + 0.01 x."""
    x = np.asarray(x, dtype=float)
    return np.where(x < CLAMP_CROSSOVER, x, 1.0 + 0.01 * x)


def clamp_grad(x):
    """Subgradient of :func:`clamp`: 1 below the crossover, 0.01 above."""
    x = np.asarray(x, dtype=float)
    return np.where(x < CLAMP_CROSSOVER, 1.0, 0.01)


@dataclass
class PbmfConfig:
    k: int
    alpha1: float = 0.5
    alpha2: float = 0.5
    alpha3: float = 0.1
    alpha4: float = 0.25
    max_iters: int = 300
    step_size: float = 0.1
    backtracking: float = 0.5
    armijo: float = 1e-4
    tol: float = 1e-6
    prune_ratio: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for name, a in (
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("alpha4", self.alpha4),
        ):
            if a < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 < self.backtracking < 1.0:
            raise ValueError("backtracking factor must be in (0, 1)")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.prune_ratio < 1.0:
            raise ValueError("prune_ratio must be in [0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass
class ObjectiveBreakdown:
    p0: float
    p1: float
    p2: float
    p3: float
    p4: float
    total: float


@dataclass
class IdfWeights:
    omega: np.ndarray  # (m, n), >= 0.5 everywhere, 0.5 wherever A is 0
    n_instances: int
    object_counts: np.ndarray  # (m,) number of instances containing each object


@dataclass(eq=False)
class ScenarioDictionary:
    w: np.ndarray  # (m, k) in [0, 1]
    object_names: list[str]
    provenance: list[str]  # per scenario: "initial" | "refined:r<i>" | "dynamic:<class>"

    @property
    def k(self) -> int:
        return self.w.shape[1]

    def binarized(self) -> np.ndarray:
        return (self.w >= 0.5).astype(np.int8)

    def members(self, scenario: int) -> list[str]:
        return [self.object_names[i] for i in np.flatnonzero(self.w[:, scenario] >= 0.5)]

    def select(self, kept: list[int]) -> "ScenarioDictionary":
        return ScenarioDictionary(
            w=self.w[:, kept].copy(),
            object_names=list(self.object_names),
            provenance=[self.provenance[j] for j in kept],
        )


@dataclass(eq=False)
class ScenarioEncoding:
    h: np.ndarray  # (k, n) in [0, 1]

    @property
    def k(self) -> int:
        return self.h.shape[0]

    def binarized(self) -> np.ndarray:
        return binarize_encoding(self.h)


def _check_binary(a: np.ndarray, name: str = "A") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    bad = ~((a == 0) | (a == 1))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(f"{name} must be binary; entry ({i}, {j}) is {a[i, j]!r}")
    return a.astype(float)


def compute_idf_weights(a: np.ndarray) -> IdfWeights:
    """Per-cell weights: max(A_ij * (1 + ln(n / count_i)), 0.5).

    Rare objects get upweighted, common ones approach weight 1, and absent
    cells sit at the 0.5 floor.  All-zero rows never divide by zero because
    the A_ij factor already zeroes their term.
    """
    a = _check_binary(a)
    m, n = a.shape
    counts = a.sum(axis=1)
    ratio = np.ones(m)
    nz = counts > 0
    ratio[nz] = n / counts[nz]
    weighted = a * (1.0 + np.log(ratio))[:, None]
    omega = np.maximum(weighted, 0.5)
    return IdfWeights(omega=omega, n_instances=n, object_counts=counts.astype(int))


def pbmf_objective(
    a: np.ndarray, w: np.ndarray, h: np.ndarray, omega: np.ndarray, config: PbmfConfig
) -> ObjectiveBreakdown:
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    omega = np.asarray(omega, dtype=float)
    m, n = a.shape
    if w.shape[0] != m or h.shape[1] != n or w.shape[1] != h.shape[0]:
        raise ValueError(
            f"shape mismatch: A {a.shape}, W {w.shape}, H {h.shape}"
        )
    if omega.shape != a.shape:
        raise ValueError(f"omega shape {omega.shape} does not match A {a.shape}")
    r = omega * (a - clamp(w @ h))
    p0 = float(np.sum(r * r))
    dh = h - h * h
    p1 = float(np.sum(dh * dh))
    dw = w - w * w
    p2 = float(np.sum(dw * dw))
    p3 = float(np.sum(np.sqrt(np.sum(h * h, axis=1))))
    gram = w.T @ w
    p4 = float(np.sum(gram * gram) - np.sum(np.diag(gram) ** 2))
    total = p0 + config.alpha1 * p1 + config.alpha2 * p2 + config.alpha3 * p3 + config.alpha4 * p4
    return ObjectiveBreakdown(p0=p0, p1=p1, p2=p2, p3=p3, p4=p4, total=total)


def _residual_grad(a, w, h, omega2):
    """d p0 / d (WH) for the weighted clamped reconstruction."""
    p = w @ h
    return -2.0 * omega2 * (a - clamp(p)) * clamp_grad(p)


def _grad_w(a, w, h, omega2, config):
    g = _residual_grad(a, w, h, omega2) @ h.T
    g += config.alpha2 * 2.0 * (w - w * w) * (1.0 - 2.0 * w)
    if config.alpha4 > 0 and w.shape[1] > 1:
        gram = w.T @ w
        off = gram - np.diag(np.diag(gram))
        g += config.alpha4 * 4.0 * (w @ off)
    return g


def _grad_h(a, w, h, omega2, config):
    g = w.T @ _residual_grad(a, w, h, omega2)
    g += config.alpha1 * 2.0 * (h - h * h) * (1.0 - 2.0 * h)
    if config.alpha3 > 0:
        norms = np.sqrt(np.sum(h * h, axis=1))
        scale = np.zeros_like(norms)
        nz = norms > 0
        scale[nz] = 1.0 / norms[nz]
        g += config.alpha3 * h * scale[:, None]  # subgradient 0 at zero rows
    return g


def _armijo_step(value, grad, objective_fn, f_current, step, config):
    """Projected backtracking step; returns (new value, f_new, accepted step) or None."""
    while step >= _MIN_STEP:
        cand = np.clip(value - step * grad, 0.0, 1.0)
        delta = cand - value
        sq = float(np.sum(delta * delta))
        if sq > 0.0:
            f_new = objective_fn(cand)
            if f_new <= f_current - config.armijo / step * sq:
                return cand, f_new, step
        step *= config.backtracking
    return None


def pbmf_fit(
    a: np.ndarray,
    config: PbmfConfig,
    object_names: list[str] | None = None,
) -> tuple[ScenarioDictionary, ScenarioEncoding, list[float]]:
    """Fit W, H by alternating projected gradient with backtracking.

    W columns are initialized from k distinct instance columns of A plus
    uniform noise in [0, 0.1]; H starts uniform in [0.25, 0.75].  Returns the
    factors at the best objective seen plus the history of accepted-step
    objectives (non-increasing).  Deterministic given ``config.seed``.
    """
    config.validate()
    a = _check_binary(a)
    m, n = a.shape
    if n == 0:
        raise ValueError("A has no instances")
    k = config.k
    if k > n:
        warnings.warn(f"k={k} exceeds the {n} instances; capping k at {n}", stacklevel=2)
        k = n
    rng = np.random.default_rng(config.seed)
    cols = rng.choice(n, size=k, replace=False)
    w = np.clip(a[:, cols] + rng.uniform(0.0, 0.1, size=(m, k)), 0.0, 1.0)
    h = rng.uniform(0.25, 0.75, size=(k, n))

    omega = compute_idf_weights(a).omega
    omega2 = omega * omega
    f = pbmf_objective(a, w, h, omega, config).total
    history = [f]
    step_w = step_h = config.step_size
    for _ in range(config.max_iters):
        f_prev = f
        moved = False
        gw = _grad_w(a, w, h, omega2, config)
        res = _armijo_step(
            w, gw, lambda cand: pbmf_objective(a, cand, h, omega, config).total, f, step_w, config
        )
        if res is not None:
            w, f, used = res
            step_w = min(used / config.backtracking, _MAX_STEP)
            history.append(f)
            moved = True
        gh = _grad_h(a, w, h, omega2, config)
        res = _armijo_step(
            h, gh, lambda cand: pbmf_objective(a, w, cand, omega, config).total, f, step_h, config
        )
        if res is not None:
            h, f, used = res
            step_h = min(used / config.backtracking, _MAX_STEP)
            history.append(f)
            moved = True
        if not moved:
            break
        if abs(f_prev - f) <= config.tol * max(1.0, abs(f_prev)):
            break
    names = list(object_names) if object_names is not None else [f"obj_{i}" for i in range(m)]
    dictionary = ScenarioDictionary(w=w, object_names=names, provenance=["initial"] * k)
    return dictionary, ScenarioEncoding(h=h), history


def _column_key(column: np.ndarray) -> int:
    digest = hashlib.blake2b(
        np.ascontiguousarray(column, dtype=np.int8).tobytes(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _h_init(a: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Per-column uniform [0.25, 0.75] init keyed by column content.

    Keying by content (not position) makes single-view encodes agree with
    batch encodes of the same view.
    """
    n = a.shape[1]
    h = np.empty((k, n))
    for j in range(n):
        rng = np.random.default_rng([seed, _column_key(a[:, j])])
        h[:, j] = rng.uniform(0.25, 0.75, size=k)
    return h


def _w_init(a: np.ndarray, k: int, seed: int) -> np.ndarray:
    m, n = a.shape
    rng = np.random.default_rng(seed)
    if k <= n:
        cols = rng.choice(n, size=k, replace=False)
    else:
        cols = np.concatenate([rng.permutation(n), rng.integers(0, n, size=k - n)])
    return np.clip(a[:, cols] + rng.uniform(0.0, 0.1, size=(m, k)), 0.0, 1.0)


def solve_partial(
    a: np.ndarray,
    config: PbmfConfig,
    *,
    w: np.ndarray | None = None,
    h: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize the objective over one factor while the other stays fixed.

    Pass exactly one of ``w`` (fixed dictionary; solves for the encoding) or
    ``h`` (fixed encoding; solves for the dictionary).  ``init`` warm-starts
    the free factor.
    """
    config.validate()
    a = _check_binary(a)
    m, n = a.shape
    if (w is None) == (h is None):
        raise ValueError("provide exactly one fixed factor (w or h)")
    omega = compute_idf_weights(a).omega
    omega2 = omega * omega
    if w is not None:
        fixed = np.asarray(w, dtype=float)
        if fixed.shape[0] != m:
            raise ValueError(f"fixed W has {fixed.shape[0]} rows for {m} objects")
        k = fixed.shape[1]
        free = np.asarray(init, dtype=float).copy() if init is not None else _h_init(a, k, config.seed)
        if free.shape != (k, n):
            raise ValueError(f"H init shape {free.shape} != {(k, n)}")
        grad_fn = lambda x: _grad_h(a, fixed, x, omega2, config)
        obj_fn = lambda x: pbmf_objective(a, fixed, x, omega, config).total
    else:
        fixed = np.asarray(h, dtype=float)
        if fixed.shape[1] != n:
            raise ValueError(f"fixed H has {fixed.shape[1]} columns for {n} instances")
        k = fixed.shape[0]
        free = np.asarray(init, dtype=float).copy() if init is not None else _w_init(a, k, config.seed)
        if free.shape != (m, k):
            raise ValueError(f"W init shape {free.shape} != {(m, k)}")
        grad_fn = lambda x: _grad_w(a, x, fixed, omega2, config)
        obj_fn = lambda x: pbmf_objective(a, x, fixed, omega, config).total

    free = np.clip(free, 0.0, 1.0)
    f = obj_fn(free)
    step = config.step_size
    for _ in range(config.max_iters):
        res = _armijo_step(free, grad_fn(free), obj_fn, f, step, config)
        if res is None:
            break
        f_prev = f
        free, f, used = res
        step = min(used / config.backtracking, _MAX_STEP)
        if abs(f_prev - f) <= config.tol * max(1.0, abs(f_prev)):
            break
    return free


def encode_columns(w: np.ndarray, a: np.ndarray, config: PbmfConfig) -> np.ndarray:
    """Encode every column of ``a`` independently against a fixed ``w``.

    Equivalent to calling :func:`solve_partial` on each single-column
    submatrix (each column gets its own step sizes, Armijo tests, and
    stopping), but vectorized across columns.  Used for per-view encodings,
    where each view is its own instance and must not couple to its batch.
    """
    config.validate()
    a = _check_binary(a)
    w = np.asarray(w, dtype=float)
    m, n = a.shape
    if w.shape[0] != m:
        raise ValueError(f"W has {w.shape[0]} rows for {m} objects")
    k = w.shape[1]
    if n == 0:
        return np.zeros((k, 0))
    # single-column IDF weights: present cells 1 + ln(1/1) = 1, absent 0.5
    omega2 = np.where(a > 0, 1.0, 0.25)
    h = _h_init(a, k, config.seed)
    # constant W-penalty terms, included so Armijo tests and the relative
    # stopping rule behave exactly like solve_partial on a single column
    dw = w - w * w
    gram = w.T @ w
    const = config.alpha2 * float(np.sum(dw * dw)) + config.alpha4 * float(
        np.sum(gram * gram) - np.sum(np.diag(gram) ** 2)
    )

    def per_column_objective(hh):
        p = w @ hh
        r = (a - clamp(p))
        rec = np.sum(omega2 * r * r, axis=0)
        dh = hh - hh * hh
        return (
            rec
            + config.alpha1 * np.sum(dh * dh, axis=0)
            + config.alpha3 * np.sum(np.abs(hh), axis=0)
            + const
        )

    def per_column_grad(hh):
        p = w @ hh
        g = w.T @ (-2.0 * omega2 * (a - clamp(p)) * clamp_grad(p))
        g += config.alpha1 * 2.0 * (hh - hh * hh) * (1.0 - 2.0 * hh)
        g += config.alpha3 * (hh > 0)  # subgradient of the L1 row term, 0 at 0
        return g

    f = per_column_objective(h)
    steps = np.full(n, config.step_size)
    active = np.ones(n, dtype=bool)
    for _ in range(config.max_iters):
        if not active.any():
            break
        grad = per_column_grad(h)
        pending = active.copy()
        trial = steps.copy()
        accepted = np.zeros(n, dtype=bool)
        while pending.any():
            cand = np.clip(h - trial[None, :] * grad, 0.0, 1.0)
            delta = cand - h
            sq = np.sum(delta * delta, axis=0)
            f_new = per_column_objective(cand)
            ok = pending & (sq > 0.0) & (f_new <= f - config.armijo / trial * sq)
            if ok.any():
                h[:, ok] = cand[:, ok]
                rel_done = np.abs(f[ok] - f_new[ok]) <= config.tol * np.maximum(1.0, np.abs(f[ok]))
                f = np.where(ok, f_new, f)
                steps[ok] = np.minimum(trial[ok] / config.backtracking, _MAX_STEP)
                accepted |= ok
                idx = np.flatnonzero(ok)
                active[idx[rel_done]] = False
                pending &= ~ok
            trial[pending] *= config.backtracking
            exhausted = pending & (trial < _MIN_STEP)
            if exhausted.any():
                active[exhausted] = False  # line search failed: column converged
                pending &= ~exhausted
    return h


def prune_scenarios(
    w: np.ndarray,
    h: np.ndarray,
    prune_ratio: float,
    allow_empty: bool = False,
    protected: tuple[int, ...] = (),
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Drop scenario j when ||H_j||_2 < prune_ratio * max_j' ||H_j'||_2.

    ``protected`` indices are never dropped but still count toward the max.
    Rows of W and H are removed consistently and order is preserved.
    """
    w = np.asarray(w, dtype=float)
    h = np.asarray(h, dtype=float)
    if w.shape[1] != h.shape[0]:
        raise ValueError(f"W has {w.shape[1]} scenarios but H has {h.shape[0]} rows")
    if not 0.0 <= prune_ratio < 1.0:
        raise ValueError("prune_ratio must be in [0, 1)")
    norms = np.sqrt(np.sum(h * h, axis=1))
    threshold = prune_ratio * (norms.max() if norms.size else 0.0)
    keep = norms >= threshold
    for j in protected:
        keep[j] = True
    kept = [int(j) for j in np.flatnonzero(keep)]
    if not kept and not allow_empty:
        raise ValueError("pruning removed every scenario; pass allow_empty=True to permit this")
    return w[:, kept].copy(), h[kept, :].copy(), kept


def binarize_encoding(h: np.ndarray) -> np.ndarray:
    """Threshold at 0.5 (boundary inclusive): H_ij >= 0.5 maps to 1."""
    return (np.asarray(h) >= 0.5).astype(np.int8)


def dynamic_extend(
    dictionary: ScenarioDictionary,
    a_new: np.ndarray,
    config: PbmfConfig,
    class_name: str = "new",
) -> tuple[ScenarioDictionary, np.ndarray]:
    """Learn up to ``config.k`` class-specific scenarios and append them.

    Existing dictionary columns are frozen (bit-identical before and after)
    while the new columns and the full encoding of ``a_new`` over
    [old | new] are optimized.  Candidate scenarios whose encoding rows fall
    below the relative group-norm threshold are pruned before appending, so
    a class already representable by the old dictionary appends nothing.
    Returns the extended dictionary and the encoding of ``a_new`` over it.
    """
    config.validate()
    a = _check_binary(a_new, name="A_new")
    m, n = a.shape
    if m != dictionary.w.shape[0]:
        raise ValueError(
            f"new-class matrix has {m} objects but the dictionary has {dictionary.w.shape[0]}"
        )
    if n == 0:
        raise ValueError("new-class matrix has no instances")
    k_old = dictionary.k
    k_new = config.k
    rng = np.random.default_rng(config.seed)
    if k_new <= n:
        cols = rng.choice(n, size=k_new, replace=False)
    else:
        cols = np.concatenate([rng.permutation(n), rng.integers(0, n, size=k_new - n)])
    w_cand = np.clip(a[:, cols] + rng.uniform(0.0, 0.1, size=(m, k_new)), 0.0, 1.0)
    h = rng.uniform(0.25, 0.75, size=(k_old + k_new, n))
    w_old = dictionary.w.copy()

    omega = compute_idf_weights(a).omega
    omega2 = omega * omega

    def assemble(wc):
        return np.concatenate([w_old, wc], axis=1)

    def obj(wc, hh):
        return pbmf_objective(a, assemble(wc), hh, omega, config).total

    f = obj(w_cand, h)
    step_w = step_h = config.step_size
    for _ in range(config.max_iters):
        f_prev = f
        moved = False
        full_grad = _grad_w(a, assemble(w_cand), h, omega2, config)
        gw = full_grad[:, k_old:]
        res = _armijo_step(w_cand, gw, lambda c: obj(c, h), f, step_w, config)
        if res is not None:
            w_cand, f, used = res
            step_w = min(used / config.backtracking, _MAX_STEP)
            moved = True
        gh = _grad_h(a, assemble(w_cand), h, omega2, config)
        res = _armijo_step(h, gh, lambda c: obj(w_cand, c), f, step_h, config)
        if res is not None:
            h, f, used = res
            step_h = min(used / config.backtracking, _MAX_STEP)
            moved = True
        if not moved:
            break
        if abs(f_prev - f) <= config.tol * max(1.0, abs(f_prev)):
            break

    # candidates with no member objects after binarization are not scenarios;
    # drop them before the usage-norm prune so a class already representable
    # by the frozen dictionary appends nothing
    nonempty = [j for j in range(k_new) if (w_cand[:, j] >= 0.5).any()]
    w_full = np.concatenate([w_old, w_cand[:, nonempty]], axis=1)
    h_full = np.concatenate([h[:k_old], h[k_old:][nonempty]], axis=0)
    _, h_kept, kept = prune_scenarios(
        w_full, h_full, config.prune_ratio, allow_empty=False, protected=tuple(range(k_old))
    )
    kept_new = [nonempty[j - k_old] for j in kept if j >= k_old]
    extended = ScenarioDictionary(
        w=np.concatenate([dictionary.w, w_cand[:, kept_new]], axis=1),
        object_names=list(dictionary.object_names),
        provenance=list(dictionary.provenance) + [f"dynamic:{class_name}"] * len(kept_new),
    )
    return extended, h_kept


@dataclass
class RefinementRound:
    round_index: int
    objective: ObjectiveBreakdown
    k: int
    val_accuracy: float


@dataclass(eq=False)
class RefinementResult:
    dictionary: ScenarioDictionary
    encoding: ScenarioEncoding
    rounds: list[RefinementRound]
    best_round: int


def refinement_loop(
    a_train: np.ndarray,
    train_labels: np.ndarray,
    a_val: np.ndarray,
    val_labels: np.ndarray,
    detector_provider,
    config: PbmfConfig,
    max_rounds: int = 5,
    patience: int = 2,
    object_names: list[str] | None = None,
):
    """Alternate detector feedback with partial re-solves of W and H.

    Each round prunes low-usage scenarios, builds a detector from the
    binarized dictionary via ``detector_provider(w_binary)``, scores the
    training views to get predicted encodings, then re-solves W against
    those predictions and H against the new W.  Validation single-view
    accuracy (multinomial logistic on detector scores) drives stopping:
    no improvement for ``patience`` consecutive rounds, or ``max_rounds``
    refinements.  Returns the best-scoring round's factors.
    """
    from .logistic import LogisticConfig, fit_logistic, predict

    dictionary, encoding, _ = pbmf_fit(a_train, config, object_names=object_names)
    if max_rounds == 0:
        return RefinementResult(dictionary, encoding, rounds=[], best_round=0)

    train_labels = np.asarray(train_labels, dtype=int)
    val_labels = np.asarray(val_labels, dtype=int)
    n_classes = int(max(train_labels.max(), val_labels.max())) + 1
    w, h = dictionary.w, encoding.h
    provenance = list(dictionary.provenance)
    rounds: list[RefinementRound] = []
    best: tuple[float, int, np.ndarray, np.ndarray, list[str]] | None = None
    no_improve = 0
    omega = compute_idf_weights(a_train).omega
    for r in range(max_rounds + 1):
        w, h, kept = prune_scenarios(w, h, config.prune_ratio)
        provenance = [provenance[j] for j in kept]
        w_binary = (w >= 0.5).astype(np.int8)
        try:
            det = detector_provider(w_binary)
            train_scores = np.asarray(det.score_matrix(a_train), dtype=float)
            val_scores = np.asarray(det.score_matrix(a_val), dtype=float)
        except Exception as exc:
            raise RuntimeError(f"detector provider failed in round {r}") from exc
        clf = fit_logistic(train_scores.T, train_labels, n_classes, LogisticConfig())
        acc = float(np.mean(predict(clf, val_scores.T) == val_labels))
        rounds.append(RefinementRound(r, pbmf_objective(a_train, w, h, omega, config), w.shape[1], acc))
        if best is None or acc > best[0]:
            best = (acc, r, w.copy(), h.copy(), list(provenance))
            no_improve = 0
        else:
            no_improve += 1
        if no_improve >= patience or r == max_rounds:
            break
        h_hat = np.clip(train_scores, 0.0, 1.0)
        w = solve_partial(a_train, config, h=h_hat, init=w)
        h = solve_partial(a_train, config, w=w, init=h_hat)
        provenance = [f"refined:r{r + 1}"] * w.shape[1]

    _, best_round, w_best, h_best, prov_best = best
    names = list(object_names) if object_names is not None else dictionary.object_names
    return RefinementResult(
        dictionary=ScenarioDictionary(w=w_best, object_names=names, provenance=prov_best),
        encoding=ScenarioEncoding(h=h_best),
        rounds=rounds,
        best_round=best_round,
    )


def reconstruction_error(a: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    """Unweighted squared error of the capped product: ||A - min(WH, 1)||_F^2."""
    r = np.asarray(a, dtype=float) - np.minimum(np.asarray(w) @ np.asarray(h), 1.0)
    return float(np.sum(r * r))


def binarized_hamming_error(a: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    """Fraction of cells where thresholded min(WH, 1) disagrees with A."""
    recon = np.minimum(np.asarray(w, dtype=float) @ np.asarray(h, dtype=float), 1.0) >= 0.5
    a = np.asarray(a) > 0
    if a.size == 0:
        return 0.0
    return float(np.mean(recon != a))
