"""Three-parameter Weibull calibration fitted by profile maximum likelihood.

The location is anchored at the sample minimum (minus a tiny offset) so the
fit reduces to the standard two-parameter profile equations, solved by
Newton iteration on the shape.  A "reversed" fit applies the same procedure
to negated data; the resulting curve is evaluated at negated scores, turning
it into a survival-style calibration of the upper tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

_ANCHOR_OFFSET = 1e-6
_MIN_SAMPLES = 10


class DegenerateFitError(ValueError):
    """Raised when the selected samples carry no spread to fit."""


@dataclass(frozen=True)
class WeibullParams:
    v: float  # location
    gamma: float  # scale, > 0
    kappa: float  # shape, > 0
    reversed_: bool = False

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"scale must be positive, got {self.gamma}")
        if not self.kappa > 0:
            raise ValueError(f"shape must be positive, got {self.kappa}")


def weibull_prob(params: WeibullParams, x):
    """CDF-style probability at ``x``.

    Non-reversed: 1 - exp(-((x - v)/gamma)^kappa) for x >= v, else 0.
    Reversed:     exp(-((x - v)/gamma)^kappa) for x >= v, else 1.
    """
    x = np.asarray(x, dtype=float)
    t = np.maximum((x - params.v) / params.gamma, 0.0)
    inner = np.exp(-np.power(t, params.kappa))
    if params.reversed_:
        out = np.where(x >= params.v, inner, 1.0)
    else:
        out = np.where(x >= params.v, 1.0 - inner, 0.0)
    return float(out) if out.ndim == 0 else out


def _profile_mle(z: np.ndarray) -> tuple[float, float]:
    """Two-parameter Weibull MLE on shifted data z > 0 via Newton on kappa."""
    ln_z = np.log(z)
    mean_ln = float(ln_z.mean())
    kappa = 1.0
    for _ in range(200):
        zk = np.power(z, kappa)
        s0 = float(zk.sum())
        s1 = float((zk * ln_z).sum())
        s2 = float((zk * ln_z * ln_z).sum())
        g = s1 / s0 - 1.0 / kappa - mean_ln
        g_prime = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (kappa * kappa)
        step = g / g_prime
        new_kappa = kappa - step
        if new_kappa <= 0:
            new_kappa = kappa / 2.0
        if abs(new_kappa - kappa) < 1e-12:
            kappa = new_kappa
            break
        kappa = new_kappa
    gamma = float(np.power(np.power(z, kappa).mean(), 1.0 / kappa))
    return kappa, gamma


def fit_weibull_mle(
    samples, tail_fraction: float = 1.0, reversed_: bool = False
) -> WeibullParams:
    """Fit location/scale/shape to the tail of ``samples`` nearest the anchor.

    ``tail_fraction`` keeps the smallest ceil(t * n) values (after negation
    for a reversed fit), never fewer than the minimum fit size, anchors the
    location just below their minimum, and runs the profile MLE on the
    shifted data.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must be in (0, 1]")
    x = np.asarray(samples, dtype=float).ravel()
    if not np.isfinite(x).all():
        raise ValueError("samples contain NaN or infinite values")
    if reversed_:
        x = -x
    x = np.sort(x)
    count = min(len(x), max(int(ceil(tail_fraction * len(x))), _MIN_SAMPLES))
    sel = x[:count]
    if count < _MIN_SAMPLES:
        raise ValueError(f"need at least {_MIN_SAMPLES} samples after tail selection, got {count}")
    spread = float(sel[-1] - sel[0])
    if spread == 0.0:
        raise DegenerateFitError("selected samples are all equal; cannot fit a scale")
    v = float(sel[0]) - _ANCHOR_OFFSET * spread
    kappa, gamma = _profile_mle(sel - v)
    return WeibullParams(v=v, gamma=gamma, kappa=kappa, reversed_=reversed_)


def sample_weibull(
    rng: np.random.Generator, kappa: float, gamma: float, v: float = 0.0, size: int = 1
) -> np.ndarray:
    """Inverse-CDF sampling; handy as an independent oracle in tests."""
    u = rng.random(size)
    return v + gamma * np.power(-np.log(1.0 - u), 1.0 / kappa)
