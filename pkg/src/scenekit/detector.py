"""Per-view scenario scoring: an exact oracle and a calibrated-noise channel.

Any model mapping a view's object vector to per-scenario scores in [0, 1]
can stand here; this module supplies the simulation stand-ins.  The ground
truth for a view is its binarized encoding against the binarized dictionary
(each view re-encoded on its own, since a scenario may be visible from only
some views).  The noisy channel flips each truth bit with ``flip_rate`` and
then passes a confident logit anchor (0.9 / 0.1) through additive Gaussian
logit noise.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .metrics import average_precision
from .pbmf import PbmfConfig, ScenarioDictionary, binarize_encoding, encode_columns

_LOGIT_HI = float(np.log(0.9 / 0.1))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class DetectorSpec:
    mode: str = "noisy"  # "oracle" | "noisy"
    noise_sigma: float = 0.0
    flip_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.mode not in ("oracle", "noisy"):
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.flip_rate < 0.5:
            raise ValueError("flip_rate must be in [0, 0.5)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def _view_key(bits: np.ndarray) -> int:
    digest = hashlib.blake2b(
        np.ascontiguousarray(bits, dtype=np.int8).tobytes(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def noise_channel(bits: np.ndarray, spec: DetectorSpec, key: int) -> np.ndarray:
    """Scores for a truth-bit vector under the flip + logit-noise channel.

    Deterministic given (bits, key, spec.seed).  With both noise parameters
    at zero the channel degenerates to the bits themselves.
    """
    bits = np.asarray(bits).astype(bool)
    if spec.noise_sigma == 0.0 and spec.flip_rate == 0.0:
        return bits.astype(float)
    rng = np.random.default_rng([spec.seed, key])
    flipped = bits ^ (rng.random(bits.shape[0]) < spec.flip_rate)
    anchors = np.where(flipped, _LOGIT_HI, -_LOGIT_HI)
    z = anchors + spec.noise_sigma * rng.standard_normal(bits.shape[0])
    return _sigmoid(z)


class Detector:
    """Deterministic-given-seed scoring function over views."""

    def __init__(
        self,
        w_binary: np.ndarray,
        spec: DetectorSpec,
        encode_config: PbmfConfig | None = None,
    ):
        spec.validate()
        w_binary = np.asarray(w_binary)
        if w_binary.ndim != 2 or w_binary.shape[1] == 0:
            raise ValueError("detector needs a nonempty binarized dictionary")
        self.w_binary = (w_binary >= 0.5).astype(np.int8)
        self.spec = spec
        self.encode_config = encode_config or PbmfConfig(k=self.w_binary.shape[1])
        self._truth_cache: dict[bytes, np.ndarray] = {}

    @property
    def k(self) -> int:
        return self.w_binary.shape[1]

    def truth_bits(self, view_bits: np.ndarray) -> np.ndarray:
        """Binarized single-view encoding of the view against the dictionary."""
        view_bits = np.asarray(view_bits, dtype=np.int8)
        key = view_bits.tobytes()
        cached = self._truth_cache.get(key)
        if cached is None:
            h = encode_columns(self.w_binary, view_bits[:, None], self.encode_config)
            cached = binarize_encoding(h)[:, 0]
            self._truth_cache[key] = cached
        return cached

    def score_view(self, view_bits: np.ndarray) -> np.ndarray:
        bits = self.truth_bits(view_bits)
        if self.spec.mode == "oracle":
            return bits.astype(float)
        return noise_channel(bits, self.spec, _view_key(np.asarray(view_bits)))

    def score_matrix(self, a_views: np.ndarray) -> np.ndarray:
        """Scores for every column of a view matrix; truth solves are deduped."""
        a_views = np.asarray(a_views, dtype=np.int8)
        n = a_views.shape[1]
        out = np.empty((self.k, n))
        if n == 0:
            return out
        uniq: dict[bytes, list[int]] = {}
        for j in range(n):
            uniq.setdefault(a_views[:, j].tobytes(), []).append(j)
        missing = [key for key in uniq if key not in self._truth_cache]
        if missing:
            cols = np.stack(
                [np.frombuffer(key, dtype=np.int8) for key in missing], axis=1
            )
            h = encode_columns(self.w_binary, cols, self.encode_config)
            bits = binarize_encoding(h)
            for idx, key in enumerate(missing):
                self._truth_cache[key] = bits[:, idx]
        for key, cols_at in uniq.items():
            for j in cols_at:
                out[:, j] = self.score_view(a_views[:, j])
        return out


def make_detector(
    dictionary: ScenarioDictionary | np.ndarray,
    spec: DetectorSpec,
    encode_config: PbmfConfig | None = None,
) -> Detector:
    w = dictionary.binarized() if isinstance(dictionary, ScenarioDictionary) else dictionary
    return Detector(w, spec, encode_config)


@dataclass
class DetectorReport:
    per_scenario_ap: list[float | None]  # None where a scenario has no positives
    positives: list[int]
    mean_ap: float | None
    n_excluded: int


def evaluate_detector(
    detector: Detector, a_views: np.ndarray, truth_h: np.ndarray
) -> DetectorReport:
    """Per-scenario average precision of detector scores against binary truth."""
    truth = np.asarray(truth_h)
    scores = detector.score_matrix(a_views)
    if truth.shape != scores.shape:
        raise ValueError(f"truth shape {truth.shape} != scores shape {scores.shape}")
    aps: list[float | None] = []
    positives: list[int] = []
    for j in range(truth.shape[0]):
        pos = int(truth[j].sum())
        positives.append(pos)
        aps.append(average_precision(truth[j] > 0, scores[j]))
    usable = [ap for ap in aps if ap is not None]
    return DetectorReport(
        per_scenario_ap=aps,
        positives=positives,
        mean_ap=float(np.mean(usable)) if usable else None,
        n_excluded=sum(1 for ap in aps if ap is None),
    )
