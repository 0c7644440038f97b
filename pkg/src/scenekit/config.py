"""Run configuration: a single YAML file fully determines an experiment.

Sections map onto the typed configs of each subsystem; anything omitted
falls back to the defaults below.  ``--seed``, ``--out-dir``, and
``--trials`` are the only CLI-level overrides.  Every report embeds
``config_hash(cfg)`` so outputs are traceable to the exact configuration.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .agent import QConfig, RewardSpec
from .dataset import GeneratorSpec, SplitSpec, random_templates
from .detector import DetectorSpec
from .pbmf import PbmfConfig
from .wsvm import WsvmConfig

DEFAULT_CONFIG: dict = {
    "seed": 0,
    "out_dir": "out",
    "trials": 10,
    "corpus": {
        "path": None,  # load an existing corpus directory instead of generating
        "num_classes": 14,
        "scenes_per_class": 20,
        "views_per_scene": 8,
        "vocabulary_size": 70,
        "templates_per_class": [2, 3],
        "objects_per_template": [4, 8],
        "template_overlap_rate": 0.05,
        "template_rate": 0.65,
        "object_dropout_rate": 0.08,
        "distractor_rate": 0.02,
        "adversarial_view_rate": 0.02,
        "templates": None,  # explicit templates override the random ones
        "min_object_views": 0,  # drop objects seen in fewer views (0 = keep all)
        "seed": 1,
    },
    "split": {"train": 12, "val": 4, "test": 4, "seed": 2},
    "pbmf": {
        "k": 16,
        "alpha1": 0.5,
        "alpha2": 0.5,
        "alpha3": 0.1,
        "alpha4": 0.25,
        "max_iters": 300,
        "step_size": 0.1,
        "backtracking": 0.5,
        "armijo": 1e-4,
        "tol": 1e-6,
        "prune_ratio": 0.1,
        "seed": 3,
    },
    "detector": {"mode": "noisy", "noise_sigma": 1.0, "flip_rate": 0.02, "seed": 4},
    "classifier": "wsvm",  # "logistic" | "wsvm"
    "logistic": {"learning_rate": 0.5, "epochs": 400, "l2": 1e-4},
    "wsvm": {
        "nu": 0.1,
        "c": 1.0,
        "tail_fraction": 0.5,
        "ocsvm_width_scale": 2.0,
        "delta_o": 0.0,
        "delta_r": 0.0,
        "samples_per_scene": 3,
        "seed": 5,
    },
    "openset": {
        "known_classes": 7,  # sampled as "known" per trial
        "pseudo_unknown_classes": 2,  # held out of the model for calibration
    },
    "reward": {
        "psi_list": [0.0, 1.5],
        "correct_base": 8.0,
        "wrong": -8.0,
        "wrongful_reject": -8.0,
        "move_when_correct": -1.0,
        "reject_unknown_base": 8.0,
        "reject_otherwise": 0.0,
        "move_otherwise": 0.0,
    },
    "agent": {
        "episodes": 20000,
        "learning_rate": 0.01,
        "discount": 0.98,
        "epsilon_start": 1.0,
        "epsilon_end": 0.05,
        "replay_capacity": 10000,
        "batch_size": 32,
        "unknown_fraction": 0.25,
        "eval_episodes_per_scene": 1,
    },
    "dynamic": {
        "initial_classes": 7,
        "k_initial": 20,
        "k_per_class": 5,
        "static_restarts": 2,  # joint baseline keeps the best of two seeds
    },
    "refinement": {"max_rounds": 5, "patience": 2},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(
    path: str | Path | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
    trials: int | None = None,
) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: config must be a mapping")
        unknown = set(loaded) - set(DEFAULT_CONFIG)
        if unknown:
            raise ValueError(f"{path}: unknown config sections {sorted(unknown)}")
        cfg = _deep_merge(cfg, loaded)
    if seed is not None:
        cfg["seed"] = seed
    if out_dir is not None:
        cfg["out_dir"] = out_dir
    if trials is not None:
        cfg["trials"] = trials
    if cfg["trials"] < 1:
        raise ValueError("trials must be >= 1")
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the experiment-determining config (output placement excluded)."""
    content = {k: v for k, v in cfg.items() if k != "out_dir"}
    canonical = json.dumps(content, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def derive_seed(base: int, *parts) -> int:
    """Stable 63-bit seed from a base seed and arbitrary labels."""
    text = ":".join([str(base)] + [str(p) for p in parts])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def build_generator_spec(cfg: dict) -> GeneratorSpec:
    c = cfg["corpus"]
    vocab = [f"obj_{i:03d}" for i in range(int(c["vocabulary_size"]))]
    if c.get("templates") is not None:
        templates = c["templates"]
    else:
        rng = np.random.default_rng(derive_seed(int(c["seed"]), "templates"))
        templates = random_templates(
            int(c["num_classes"]),
            vocab,
            rng,
            tuple(c["templates_per_class"]),
            tuple(c["objects_per_template"]),
            float(c["template_overlap_rate"]),
        )
    return GeneratorSpec(
        num_classes=int(c["num_classes"]),
        scenes_per_class=int(c["scenes_per_class"]),
        object_vocabulary=vocab,
        class_scenario_templates=templates,
        views_per_scene=int(c["views_per_scene"]),
        template_rate=float(c["template_rate"]),
        object_dropout_rate=float(c["object_dropout_rate"]),
        distractor_rate=float(c["distractor_rate"]),
        adversarial_view_rate=float(c["adversarial_view_rate"]),
        seed=int(c["seed"]),
    )


def build_split_spec(cfg: dict) -> SplitSpec:
    s = cfg["split"]
    return SplitSpec(train=int(s["train"]), val=int(s["val"]), test=int(s["test"]), seed=int(s["seed"]))


def build_pbmf_config(cfg: dict, **overrides) -> PbmfConfig:
    p = dict(cfg["pbmf"])
    p.update(overrides)
    return PbmfConfig(
        k=int(p["k"]),
        alpha1=float(p["alpha1"]),
        alpha2=float(p["alpha2"]),
        alpha3=float(p["alpha3"]),
        alpha4=float(p["alpha4"]),
        max_iters=int(p["max_iters"]),
        step_size=float(p["step_size"]),
        backtracking=float(p["backtracking"]),
        armijo=float(p["armijo"]),
        tol=float(p["tol"]),
        prune_ratio=float(p["prune_ratio"]),
        seed=int(p["seed"]),
    )


def build_detector_spec(cfg: dict, **overrides) -> DetectorSpec:
    d = dict(cfg["detector"])
    d.update(overrides)
    return DetectorSpec(
        mode=str(d["mode"]),
        noise_sigma=float(d["noise_sigma"]),
        flip_rate=float(d["flip_rate"]),
        seed=int(d["seed"]),
    )


def build_wsvm_config(cfg: dict, **overrides) -> WsvmConfig:
    w = dict(cfg["wsvm"])
    w.update(overrides)
    return WsvmConfig(
        nu=float(w["nu"]),
        ocsvm_width_scale=float(w.get("ocsvm_width_scale", 1.0)),
        c=float(w["c"]),
        tail_fraction=float(w["tail_fraction"]),
        delta_o=float(w["delta_o"]),
        delta_r=float(w["delta_r"]),
        seed=int(w["seed"]),
    )


def build_reward_spec(cfg: dict, psi: float) -> RewardSpec:
    r = cfg["reward"]
    return RewardSpec(
        psi=float(psi),
        correct_base=float(r["correct_base"]),
        wrong=float(r["wrong"]),
        wrongful_reject=float(r["wrongful_reject"]),
        move_when_correct=float(r["move_when_correct"]),
        reject_unknown_base=float(r["reject_unknown_base"]),
        reject_otherwise=float(r["reject_otherwise"]),
        move_otherwise=float(r["move_otherwise"]),
    )


def build_q_config(cfg: dict, seed: int) -> QConfig:
    a = cfg["agent"]
    return QConfig(
        learning_rate=float(a["learning_rate"]),
        discount=float(a["discount"]),
        epsilon_start=float(a["epsilon_start"]),
        epsilon_end=float(a["epsilon_end"]),
        replay_capacity=int(a["replay_capacity"]),
        batch_size=int(a["batch_size"]),
        episodes=int(a["episodes"]),
        seed=seed,
    )
