"""Weibull-calibrated SVM for open-set classification.

Per known class y the model keeps
  * a one-class RBF SVM whose in-class decision scores are calibrated to an
    inclusion probability P_O(y | f),
  * a one-vs-rest linear SVM with two calibrations of its decision score:
    P_R+(y | f) (Weibull CDF over positive-class scores) and P_R-(y | f)
    (reverse Weibull over negated negative-class scores, evaluated at -f).

Deciding on a feature vector runs three steps: classes must clear the
inclusion threshold delta_O, then the product P_R+ * P_R- must clear
delta_R, and the prediction is the argmax of the product among survivors.
A threshold of exactly zero disables its gate, so with both thresholds at
zero the decision reduces exactly to the closed-set argmax of the product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .svm import (
    LinearSvmModel,
    OcSvmModel,
    fit_linear_svm_ovr,
    fit_ocsvm,
    median_pairwise_width,
)
from .weibull import WeibullParams, fit_weibull_mle, weibull_prob

UNKNOWN_INDEX = -1

DELTA_O_GRID = (0.0, 0.001, 0.01, 0.05, 0.1)
DELTA_R_GRID = tuple(round(0.05 * i, 2) for i in range(11))  # 0.0 .. 0.5


@dataclass
class WsvmConfig:
    nu: float = 0.1
    ocsvm_width: float | None = None  # None: median pairwise heuristic
    ocsvm_width_scale: float = 1.0  # multiplier on the heuristic width
    c: float = 1.0
    tail_fraction: float = 1.0
    delta_o: float = 0.0
    delta_r: float = 0.0
    svm_tol: float = 1e-4
    min_class_samples: int = 10
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("nu must be in (0, 1]")
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.ocsvm_width_scale <= 0:
            raise ValueError("ocsvm_width_scale must be positive")
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must be in (0, 1]")
        for name, d in (("delta_o", self.delta_o), ("delta_r", self.delta_r)):
            if not 0.0 <= d <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass(eq=False)
class ClassCalibration:
    ocsvm: OcSvmModel
    inclusion: WeibullParams  # P_O over in-class one-class scores
    linear: LinearSvmModel
    positive: WeibullParams  # P_R+ over positive-class linear scores
    negative: WeibullParams  # P_R- (reversed) over negative-class linear scores


@dataclass(eq=False)
class WsvmModel:
    class_names: list[str]
    classes: list[ClassCalibration]
    delta_o: float
    delta_r: float
    feature_dim: int

    @property
    def n_classes(self) -> int:
        return len(self.classes)


@dataclass
class WsvmDecision:
    label: int | None  # None when rejected
    per_class: np.ndarray  # P_R+ * P_R- * gate(P_O), all classes
    products: np.ndarray  # P_R+ * P_R- ungated
    p_o: np.ndarray
    forced: int  # best class ignoring rejection, for agents that must guess

    @property
    def rejected(self) -> bool:
        return self.label is None


def fit_wsvm(
    features: np.ndarray,
    labels: np.ndarray,
    class_names: list[str],
    config: WsvmConfig | None = None,
) -> WsvmModel:
    config = config or WsvmConfig()
    config.validate()
    x = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=int)
    n_classes = len(class_names)
    if n_classes < 2:
        raise ValueError("need at least 2 known classes")
    if x.shape[0] != len(labels):
        raise ValueError("features and labels must align")
    for cls, name in enumerate(class_names):
        count = int(np.sum(labels == cls))
        if count < config.min_class_samples:
            raise ValueError(
                f"class {name!r} has {count} samples; "
                f"need at least {config.min_class_samples}"
            )
    linears = fit_linear_svm_ovr(
        x, labels, n_classes, c=config.c, tol=config.svm_tol, seed=config.seed
    )
    calibrations = []
    for cls in range(n_classes):
        in_class = x[labels == cls]
        width = config.ocsvm_width
        if width is None and config.ocsvm_width_scale != 1.0:
            width = median_pairwise_width(in_class) * config.ocsvm_width_scale
        ocsvm = fit_ocsvm(in_class, nu=config.nu, width=width, tol=config.svm_tol)
        inclusion = fit_weibull_mle(ocsvm.decision(in_class), config.tail_fraction)
        linear = linears[cls]
        pos_scores = linear.decision(in_class)
        neg_scores = linear.decision(x[labels != cls])
        positive = fit_weibull_mle(pos_scores, config.tail_fraction)
        negative = fit_weibull_mle(neg_scores, config.tail_fraction, reversed_=True)
        calibrations.append(
            ClassCalibration(
                ocsvm=ocsvm,
                inclusion=inclusion,
                linear=linear,
                positive=positive,
                negative=negative,
            )
        )
    return WsvmModel(
        class_names=list(class_names),
        classes=calibrations,
        delta_o=config.delta_o,
        delta_r=config.delta_r,
        feature_dim=x.shape[1],
    )


def with_thresholds(model: WsvmModel, delta_o: float, delta_r: float) -> WsvmModel:
    return WsvmModel(
        class_names=model.class_names,
        classes=model.classes,
        delta_o=delta_o,
        delta_r=delta_r,
        feature_dim=model.feature_dim,
    )


def class_scores(model: WsvmModel, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(P_O, P_R+ * P_R-) for every sample and class; shapes (n, C)."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    n = x.shape[0]
    p_o = np.empty((n, model.n_classes))
    products = np.empty((n, model.n_classes))
    for cls, cal in enumerate(model.classes):
        f_oc = cal.ocsvm.decision(x)
        p_o[:, cls] = weibull_prob(cal.inclusion, f_oc)
        f_lin = cal.linear.decision(x)
        products[:, cls] = weibull_prob(cal.positive, f_lin) * weibull_prob(
            cal.negative, -f_lin
        )
    return p_o, products


def _gate(values: np.ndarray, threshold: float) -> np.ndarray:
    """Strict threshold test; a threshold of exactly 0 disables the gate."""
    if threshold <= 0.0:
        return np.ones_like(values, dtype=bool)
    return values > threshold


def _decide_row(p_o: np.ndarray, products: np.ndarray, delta_o: float, delta_r: float) -> WsvmDecision:
    gate_o = _gate(p_o, delta_o)
    per_class = products * gate_o
    forced = int(np.argmax(per_class)) if per_class.max() > 0 else int(np.argmax(products))
    if not gate_o.any():
        return WsvmDecision(None, per_class, products, p_o, forced)
    gate_r = _gate(products, delta_r) & gate_o
    if not gate_r.any():
        return WsvmDecision(None, per_class, products, p_o, forced)
    masked = np.where(gate_r, products, -np.inf)
    label = int(np.argmax(masked))
    return WsvmDecision(label, per_class, products, p_o, forced)


def wsvm_decide(model: WsvmModel, feature: np.ndarray) -> WsvmDecision:
    p_o, products = class_scores(model, feature)
    return _decide_row(p_o[0], products[0], model.delta_o, model.delta_r)


def decide_batch(model: WsvmModel, features: np.ndarray) -> list[WsvmDecision]:
    p_o, products = class_scores(model, features)
    return [
        _decide_row(p_o[i], products[i], model.delta_o, model.delta_r)
        for i in range(p_o.shape[0])
    ]


def _grid_decisions(p_o, products, delta_o, delta_r):
    """Vectorized labels (reject = -1) for one threshold pair over all samples."""
    gate_o = _gate(p_o, delta_o)
    gate_r = _gate(products, delta_r) & gate_o
    any_survivor = gate_r.any(axis=1)
    masked = np.where(gate_r, products, -np.inf)
    labels = np.argmax(masked, axis=1)
    return np.where(any_survivor, labels, UNKNOWN_INDEX)


def calibrate_thresholds(
    model: WsvmModel,
    features: np.ndarray,
    labels: np.ndarray,
    delta_o_grid=DELTA_O_GRID,
    delta_r_grid=DELTA_R_GRID,
) -> tuple[float, float]:
    """Grid-search thresholds maximizing the harmonic mean of known-class
    accuracy and unknown recall; ties resolve toward smaller thresholds.

    ``labels`` must contain at least one unknown (-1) sample, e.g. from a
    pseudo-unknown class holdout.
    """
    labels = np.asarray(labels, dtype=int)
    is_unknown = labels == UNKNOWN_INDEX
    if not is_unknown.any():
        raise ValueError(
            "calibration needs unknown-labeled validation samples; hold out "
            "some classes as pseudo-unknowns"
        )
    p_o, products = class_scores(model, features)
    known = ~is_unknown
    best = (-1.0, 0.0, 0.0)
    for delta_o in sorted(delta_o_grid):
        for delta_r in sorted(delta_r_grid):
            decided = _grid_decisions(p_o, products, delta_o, delta_r)
            known_acc = float(np.mean(decided[known] == labels[known])) if known.any() else 0.0
            recall = float(np.mean(decided[is_unknown] == UNKNOWN_INDEX))
            hm = 0.0
            if known_acc + recall > 0:
                hm = 2.0 * known_acc * recall / (known_acc + recall)
            if hm > best[0]:
                best = (hm, delta_o, delta_r)
    return best[1], best[2]


@dataclass
class InfluenceEntry:
    scenario: int
    members: list[str]
    influence: float
    above_threshold: bool


def explain_prediction(
    class_weights: np.ndarray,
    fused_scores: np.ndarray,
    dictionary,
    report_threshold: float = 1.0,
) -> list[InfluenceEntry]:
    """Rank scenarios by fused score times the class weight.

    Entries whose influence exceeds ``report_threshold`` are flagged as the
    ones worth surfacing to a person.
    """
    weights = np.asarray(class_weights, dtype=float)
    scores = np.asarray(fused_scores, dtype=float)
    if weights.shape != scores.shape:
        raise ValueError(f"weights shape {weights.shape} != scores shape {scores.shape}")
    influence = scores * weights
    order = np.argsort(-influence, kind="stable")
    return [
        InfluenceEntry(
            scenario=int(j),
            members=dictionary.members(int(j)),
            influence=float(influence[j]),
            above_threshold=bool(influence[j] > report_threshold),
        )
        for j in order
    ]


def _weibull_to_dict(p: WeibullParams) -> dict:
    return {"v": p.v, "gamma": p.gamma, "kappa": p.kappa, "reversed": p.reversed_}


def _weibull_from_dict(d: dict) -> WeibullParams:
    return WeibullParams(v=d["v"], gamma=d["gamma"], kappa=d["kappa"], reversed_=d["reversed"])


def save_wsvm(model: WsvmModel, path: str | Path) -> None:
    payload = {
        "format": "wsvm-model",
        "version": 1,
        "class_names": model.class_names,
        "delta_o": model.delta_o,
        "delta_r": model.delta_r,
        "feature_dim": model.feature_dim,
        "classes": [
            {
                "ocsvm": {
                    "support_vectors": cal.ocsvm.support_vectors.tolist(),
                    "alpha": cal.ocsvm.alpha.tolist(),
                    "rho": cal.ocsvm.rho,
                    "width": cal.ocsvm.width,
                    "nu": cal.ocsvm.nu,
                },
                "inclusion": _weibull_to_dict(cal.inclusion),
                "linear": {
                    "w": cal.linear.w.tolist(),
                    "b": cal.linear.b,
                    "c": cal.linear.c,
                },
                "positive": _weibull_to_dict(cal.positive),
                "negative": _weibull_to_dict(cal.negative),
            }
            for cal in model.classes
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_wsvm(path: str | Path) -> WsvmModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "wsvm-model":
        raise ValueError(f"{path}: not a wsvm model file")
    classes = []
    for entry in payload["classes"]:
        oc = entry["ocsvm"]
        classes.append(
            ClassCalibration(
                ocsvm=OcSvmModel(
                    support_vectors=np.asarray(oc["support_vectors"], dtype=float),
                    alpha=np.asarray(oc["alpha"], dtype=float),
                    rho=oc["rho"],
                    width=oc["width"],
                    nu=oc["nu"],
                ),
                inclusion=_weibull_from_dict(entry["inclusion"]),
                linear=LinearSvmModel(
                    w=np.asarray(entry["linear"]["w"], dtype=float),
                    b=entry["linear"]["b"],
                    c=entry["linear"]["c"],
                ),
                positive=_weibull_from_dict(entry["positive"]),
                negative=_weibull_from_dict(entry["negative"]),
            )
        )
    return WsvmModel(
        class_names=list(payload["class_names"]),
        classes=classes,
        delta_o=payload["delta_o"],
        delta_r=payload["delta_r"],
        feature_dim=payload["feature_dim"],
    )
