"""Experiment harness: closed-set baselines, open-set trials, dynamic
dictionary comparison, and active-exploration sweeps.

Every run is a pure function of (config, seed): per-trial randomness comes
from seeds derived with :func:`scenekit.config.derive_seed`, outputs are
CSV files whose header comment carries the config hash, and repeated runs
produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import AgentModels, run_episode, train_policy
from .config import (
    build_detector_spec,
    build_generator_spec,
    build_pbmf_config,
    build_q_config,
    build_reward_spec,
    build_split_spec,
    build_wsvm_config,
    config_hash,
    derive_seed,
)
from .dataset import (
    Corpus,
    filter_rare_objects,
    generate_corpus,
    read_corpus,
    select_classes,
    split_corpus,
)
from .detector import Detector, DetectorSpec, make_detector, noise_channel, _view_key
from .features import all_view_features, sample_fused_features
from .logistic import LogisticConfig, fit_logistic, predict, predict_proba
from .metrics import aggregate_rows, unknown_auprc
from .pbmf import (
    PbmfConfig,
    ScenarioDictionary,
    ScenarioEncoding,
    pbmf_fit,
    prune_scenarios,
    reconstruction_error,
    solve_partial,
)
from .reporting import write_csv
from .wsvm import (
    UNKNOWN_INDEX,
    calibrate_thresholds,
    decide_batch,
    fit_wsvm,
    with_thresholds,
)


def resolve_corpus(cfg: dict) -> Corpus:
    c = cfg["corpus"]
    if c.get("path"):
        corpus = read_corpus(c["path"])
    else:
        corpus = generate_corpus(build_generator_spec(cfg))
    if c.get("min_object_views", 0) > 0:
        corpus = filter_rare_objects(corpus, int(c["min_object_views"]))
    return corpus


def prepare_splits(cfg: dict) -> tuple[Corpus, Corpus, Corpus, Corpus]:
    corpus = resolve_corpus(cfg)
    train, val, test = split_corpus(corpus, build_split_spec(cfg))
    return corpus, train, val, test


def learn_dictionary(
    a_train: np.ndarray,
    config: PbmfConfig,
    object_names: list[str] | None = None,
) -> tuple[ScenarioDictionary, ScenarioEncoding]:
    dictionary, encoding, _ = pbmf_fit(a_train, config, object_names=object_names)
    w, h, kept = prune_scenarios(dictionary.w, encoding.h, config.prune_ratio)
    return dictionary.select(kept), ScenarioEncoding(h=h)


def _logistic_config(cfg: dict) -> LogisticConfig:
    lg = cfg["logistic"]
    return LogisticConfig(
        learning_rate=float(lg["learning_rate"]), epochs=int(lg["epochs"]), l2=float(lg["l2"])
    )


def noisy_object_scores(a_views: np.ndarray, spec: DetectorSpec) -> np.ndarray:
    """The detector's noise channel applied directly to raw object bits."""
    a_views = np.asarray(a_views, dtype=np.int8)
    out = np.empty(a_views.shape, dtype=float)
    cache: dict[bytes, np.ndarray] = {}
    for j in range(a_views.shape[1]):
        key = a_views[:, j].tobytes()
        scores = cache.get(key)
        if scores is None:
            scores = noise_channel(a_views[:, j], spec, _view_key(a_views[:, j]))
            cache[key] = scores
        out[:, j] = scores
    return out


# --------------------------------------------------------------------------
# closed-set baselines
# --------------------------------------------------------------------------


def _naive_all_view_accuracy(model, test: Corpus, test_features: np.ndarray) -> float:
    """Scene prediction from the single most confident view (non-fused rule)."""
    correct = 0
    labels = test.scene_labels()
    v = test.views_per_scene
    for i in range(test.n_scenes):
        probs = predict_proba(model, test_features[i * v : (i + 1) * v])
        best_view = int(np.argmax(probs.max(axis=1)))
        if int(np.argmax(probs[best_view])) == labels[i]:
            correct += 1
    return correct / test.n_scenes


def _fused_all_view_accuracy(model, test: Corpus, test_scores: np.ndarray) -> float:
    fused = all_view_features(test_scores, test.n_scenes, test.views_per_scene)
    return float(np.mean(predict(model, fused) == test.scene_labels()))


def run_closed_set(cfg: dict, out_dir: str | Path | None = None) -> dict:
    """Closed-set accuracy rows: object and scenario features, oracle and
    noisy detectors, logistic and open-set classifiers."""
    corpus, train, val, test = prepare_splits(cfg)
    lg_cfg = _logistic_config(cfg)
    n_classes = len(corpus.class_names)
    det_spec = build_detector_spec(cfg)
    rows: list[dict] = []

    train_labels = train.view_labels()
    test_labels = test.view_labels()

    # object-presence rows (all-view via the most-confident-view rule)
    gt_train = train.a_views.T.astype(float)
    gt_test = test.a_views.T.astype(float)
    model = fit_logistic(gt_train, train_labels, n_classes, lg_cfg)
    rows.append(
        {
            "method": "ground_truth_objects+logistic",
            "single_view_accuracy": float(np.mean(predict(model, gt_test) == test_labels)),
            "all_view_accuracy": _naive_all_view_accuracy(model, test, gt_test),
        }
    )
    noisy_train = noisy_object_scores(train.a_views, det_spec).T
    noisy_test = noisy_object_scores(test.a_views, det_spec).T
    model = fit_logistic(noisy_train, train_labels, n_classes, lg_cfg)
    rows.append(
        {
            "method": "noisy_objects+logistic",
            "single_view_accuracy": float(np.mean(predict(model, noisy_test) == test_labels)),
            "all_view_accuracy": _naive_all_view_accuracy(model, test, noisy_test),
        }
    )

    # scenario rows share one dictionary learned from the training views
    pcfg = build_pbmf_config(cfg, seed=derive_seed(cfg["seed"], "closed-pbmf"))
    dictionary, _ = learn_dictionary(train.a_views, pcfg, object_names=corpus.object_vocabulary)
    oracle = make_detector(dictionary, DetectorSpec(mode="oracle", seed=det_spec.seed))
    noisy = make_detector(dictionary, det_spec)
    noisy._truth_cache = oracle._truth_cache  # same dictionary: share encode work

    for name, det in (("oracle_scenarios", oracle), ("detected_scenarios", noisy)):
        s_train = det.score_matrix(train.a_views)
        s_test = det.score_matrix(test.a_views)
        model = fit_logistic(s_train.T, train_labels, n_classes, lg_cfg)
        rows.append(
            {
                "method": f"{name}+logistic",
                "single_view_accuracy": float(np.mean(predict(model, s_test.T) == test_labels)),
                "all_view_accuracy": _fused_all_view_accuracy(model, test, s_test),
            }
        )

    # open-set classifier evaluated closed-set (zero thresholds never reject)
    rng = np.random.default_rng(derive_seed(cfg["seed"], "closed-features"))
    s_train = noisy.score_matrix(train.a_views)
    s_test = noisy.score_matrix(test.a_views)
    feats, labels = sample_fused_features(
        s_train, train.scenes, train.scene_labels(), rng, int(cfg["wsvm"]["samples_per_scene"])
    )
    wcfg = build_wsvm_config(cfg, delta_o=0.0, delta_r=0.0, seed=derive_seed(cfg["seed"], "closed-wsvm"))
    wmodel = fit_wsvm(feats, labels, corpus.class_names, wcfg)
    single_preds = np.array([d.label for d in decide_batch(wmodel, s_test.T)])
    fused_feats = all_view_features(s_test, test.n_scenes, test.views_per_scene)
    fused_preds = np.array([d.label for d in decide_batch(wmodel, fused_feats)])
    rows.append(
        {
            "method": "detected_scenarios+wsvm",
            "single_view_accuracy": float(np.mean(single_preds == test_labels)),
            "all_view_accuracy": float(np.mean(fused_preds == test.scene_labels())),
        }
    )

    result = {"rows": rows}
    if out_dir is not None:
        result["csv"] = str(
            write_csv(
                Path(out_dir) / "closed_set.csv",
                ["method", "single_view_accuracy", "all_view_accuracy"],
                rows,
                config_hash(cfg),
                cfg["seed"],
            )
        )
    return result


# --------------------------------------------------------------------------
# open-set trials
# --------------------------------------------------------------------------


@dataclass(eq=False)
class OpenSetTrial:
    trial: int
    model_classes: list[str]
    pseudo_classes: list[str]
    unknown_classes: list[str]
    dictionary: ScenarioDictionary
    detector: Detector
    model: "object"  # calibrated WsvmModel
    delta_o: float
    delta_r: float


def _prepare_openset_trial(
    cfg: dict, corpus: Corpus, train: Corpus, val: Corpus, trial: int
) -> OpenSetTrial:
    seed0 = cfg["seed"]
    os_cfg = cfg["openset"]
    n_known = int(os_cfg["known_classes"])
    n_pseudo = int(os_cfg["pseudo_unknown_classes"])
    if n_known > len(corpus.class_names):
        raise ValueError("known_classes exceeds the corpus class count")
    if n_known - n_pseudo < 2:
        raise ValueError("need at least 2 model classes after the pseudo-unknown holdout")
    rng = np.random.default_rng(derive_seed(seed0, "trial-classes", trial))
    perm = rng.permutation(len(corpus.class_names))
    known = [corpus.class_names[i] for i in perm[:n_known]]
    unknown = [corpus.class_names[i] for i in perm[n_known:]]
    model_classes = known[: n_known - n_pseudo]
    pseudo_classes = known[n_known - n_pseudo :]

    train_m = select_classes(train, model_classes)
    pcfg = build_pbmf_config(cfg, seed=derive_seed(seed0, "pbmf", trial))
    dictionary, _ = learn_dictionary(
        train_m.a_views, pcfg, object_names=corpus.object_vocabulary
    )
    det = make_detector(
        dictionary, build_detector_spec(cfg, seed=derive_seed(seed0, "detector", trial))
    )
    feat_rng = np.random.default_rng(derive_seed(seed0, "features", trial))
    feats, labels = sample_fused_features(
        det.score_matrix(train_m.a_views),
        train_m.scenes,
        train_m.scene_labels(),
        feat_rng,
        int(cfg["wsvm"]["samples_per_scene"]),
    )
    wcfg = build_wsvm_config(cfg, seed=derive_seed(seed0, "wsvm", trial))
    model = fit_wsvm(feats, labels, model_classes, wcfg)

    # calibration set: full-view fusion plus sampled late-stage fusions of the
    # validation scenes, with the held-out classes standing in as unknowns
    cal_rng = np.random.default_rng(derive_seed(seed0, "calibration", trial))
    val_m = select_classes(val, model_classes)
    val_p = select_classes(val, pseudo_classes) if pseudo_classes else None
    half_views = max(1, val_m.views_per_scene // 2)
    cal_feats, cal_labels = sample_fused_features(
        det.score_matrix(val_m.a_views),
        val_m.scenes,
        val_m.scene_labels(),
        cal_rng,
        samples_per_scene=3,
        min_views=half_views,
    )
    if val_p is not None and val_p.n_scenes:
        pseudo_feats, _ = sample_fused_features(
            det.score_matrix(val_p.a_views),
            val_p.scenes,
            np.zeros(val_p.n_scenes, dtype=int),
            cal_rng,
            samples_per_scene=3,
            min_views=half_views,
        )
        cal_feats = np.concatenate([cal_feats, pseudo_feats], axis=0)
        cal_labels = np.concatenate(
            [cal_labels, np.full(len(pseudo_feats), UNKNOWN_INDEX)]
        )
    delta_o, delta_r = calibrate_thresholds(model, cal_feats, cal_labels)
    model = with_thresholds(model, delta_o, delta_r)
    return OpenSetTrial(
        trial=trial,
        model_classes=model_classes,
        pseudo_classes=pseudo_classes,
        unknown_classes=unknown,
        dictionary=dictionary,
        detector=det,
        model=model,
        delta_o=delta_o,
        delta_r=delta_r,
    )


_OPEN_FIELDS = [
    "trial",
    "known_accuracy",
    "unknown_precision",
    "unknown_recall",
    "unknown_auprc",
    "delta_o",
    "delta_r",
    "known_classes",
    "unknown_classes",
]


def run_open_set_trials(cfg: dict, out_dir: str | Path | None = None) -> dict:
    """Repeated known/unknown class splits: train open-set model on the known
    half, calibrate on a pseudo-unknown holdout, evaluate on everything."""
    corpus, train, val, test = prepare_splits(cfg)
    if len(corpus.class_names) < 4:
        raise ValueError("open-set trials need at least 4 classes")
    rows = []
    for trial in range(int(cfg["trials"])):
        setup = _prepare_openset_trial(cfg, corpus, train, val, trial)
        test_m = select_classes(test, setup.model_classes)
        test_u = select_classes(test, setup.unknown_classes)
        feats_known = all_view_features(
            setup.detector.score_matrix(test_m.a_views), test_m.n_scenes, test_m.views_per_scene
        )
        feats_unknown = all_view_features(
            setup.detector.score_matrix(test_u.a_views), test_u.n_scenes, test_u.views_per_scene
        )
        feats = np.concatenate([feats_known, feats_unknown], axis=0)
        truth = np.concatenate(
            [test_m.scene_labels(), np.full(test_u.n_scenes, UNKNOWN_INDEX)]
        )
        decisions = decide_batch(setup.model, feats)
        preds = np.array([UNKNOWN_INDEX if d.rejected else d.label for d in decisions])
        rejection = np.array([1.0 - d.per_class.max() for d in decisions])
        known_mask = truth != UNKNOWN_INDEX
        tp = int(np.sum((preds == UNKNOWN_INDEX) & ~known_mask))
        n_rejected = int(np.sum(preds == UNKNOWN_INDEX))
        rows.append(
            {
                "trial": trial,
                "known_accuracy": float(np.mean(preds[known_mask] == truth[known_mask])),
                "unknown_precision": tp / n_rejected if n_rejected else None,
                "unknown_recall": float(np.mean(preds[~known_mask] == UNKNOWN_INDEX)),
                "unknown_auprc": unknown_auprc(truth, rejection),
                "delta_o": setup.delta_o,
                "delta_r": setup.delta_r,
                "known_classes": "|".join(setup.model_classes),
                "unknown_classes": "|".join(setup.unknown_classes),
            }
        )
    aggregate = aggregate_rows(
        rows, ["known_accuracy", "unknown_precision", "unknown_recall", "unknown_auprc"]
    )
    result = {"rows": rows, "aggregate": aggregate}
    if out_dir is not None:
        agg_row = {"trial": "aggregate"}
        agg_row.update(
            {
                "known_accuracy": aggregate["known_accuracy_mean"],
                "unknown_precision": aggregate["unknown_precision_mean"],
                "unknown_recall": aggregate["unknown_recall_mean"],
                "unknown_auprc": aggregate["unknown_auprc_mean"],
            }
        )
        result["csv"] = str(
            write_csv(
                Path(out_dir) / "open_set_trials.csv",
                _OPEN_FIELDS,
                rows + [agg_row],
                config_hash(cfg),
                cfg["seed"],
            )
        )
    return result


# --------------------------------------------------------------------------
# dynamic dictionary comparison
# --------------------------------------------------------------------------


def run_dynamic_comparison(cfg: dict, out_dir: str | Path | None = None) -> dict:
    """Static factorization of all classes vs frozen-dictionary extension."""
    from .pbmf import dynamic_extend

    corpus, train, val, test = prepare_splits(cfg)
    dyn_cfg = cfg["dynamic"]
    n_initial = int(dyn_cfg["initial_classes"])
    if len(corpus.class_names) < max(n_initial + 1, 8):
        raise ValueError("dynamic comparison needs at least 8 classes")
    lg_cfg = _logistic_config(cfg)
    n_classes = len(corpus.class_names)
    rows = []
    for trial in range(int(cfg["trials"])):
        seed0 = cfg["seed"]
        rng = np.random.default_rng(derive_seed(seed0, "dyn-classes", trial))
        perm = rng.permutation(n_classes)
        initial = [corpus.class_names[i] for i in perm[:n_initial]]
        extras = [corpus.class_names[i] for i in perm[n_initial:]]

        train_init = select_classes(train, initial)
        pcfg_init = build_pbmf_config(
            cfg, k=int(dyn_cfg["k_initial"]), seed=derive_seed(seed0, "dyn-init", trial)
        )
        dictionary, _ = learn_dictionary(
            train_init.a_views, pcfg_init, object_names=corpus.object_vocabulary
        )
        for class_name in extras:
            a_c = select_classes(train, [class_name]).a_views
            pcfg_ext = build_pbmf_config(
                cfg,
                k=int(dyn_cfg["k_per_class"]),
                seed=derive_seed(seed0, "dyn-ext", trial, class_name),
            )
            dictionary, _ = dynamic_extend(dictionary, a_c, pcfg_ext, class_name=class_name)

        k_total = dictionary.k
        best_static = None
        for restart in range(max(1, int(dyn_cfg["static_restarts"]))):
            pcfg_static = build_pbmf_config(
                cfg, k=k_total, seed=derive_seed(seed0, "dyn-static", trial, restart)
            )
            sd, se, hist = pbmf_fit(
                train.a_views, pcfg_static, object_names=corpus.object_vocabulary
            )
            if best_static is None or hist[-1] < best_static[2]:
                best_static = (sd, se, hist[-1])
        static_dict = best_static[0]

        pcfg_enc = build_pbmf_config(cfg, k=k_total)
        h_dyn = solve_partial(train.a_views, pcfg_enc, w=dictionary.w)
        h_static = solve_partial(train.a_views, pcfg_enc, w=static_dict.w)
        err_dyn = reconstruction_error(train.a_views, dictionary.w, h_dyn)
        err_static = reconstruction_error(train.a_views, static_dict.w, h_static)

        accs = {}
        for tag, dic in (("static", static_dict), ("dynamic", dictionary)):
            det = make_detector(dic, DetectorSpec(mode="oracle"))
            s_train = det.score_matrix(train.a_views)
            s_test = det.score_matrix(test.a_views)
            model = fit_logistic(s_train.T, train.view_labels(), n_classes, lg_cfg)
            accs[f"single_{tag}"] = float(
                np.mean(predict(model, s_test.T) == test.view_labels())
            )
            accs[f"all_{tag}"] = _fused_all_view_accuracy(model, test, s_test)

        rows.append(
            {
                "trial": trial,
                "k_dynamic": k_total,
                "reconstruction_error_static": err_static,
                "reconstruction_error_dynamic": err_dyn,
                "error_ratio": err_dyn / err_static if err_static > 0 else None,
                "single_view_accuracy_static": accs["single_static"],
                "single_view_accuracy_dynamic": accs["single_dynamic"],
                "all_view_accuracy_static": accs["all_static"],
                "all_view_accuracy_dynamic": accs["all_dynamic"],
                "all_view_gap": abs(accs["all_static"] - accs["all_dynamic"]),
            }
        )
    aggregate = aggregate_rows(
        rows,
        [
            "k_dynamic",
            "reconstruction_error_static",
            "reconstruction_error_dynamic",
            "error_ratio",
            "single_view_accuracy_static",
            "single_view_accuracy_dynamic",
            "all_view_accuracy_static",
            "all_view_accuracy_dynamic",
            "all_view_gap",
        ],
    )
    result = {"rows": rows, "aggregate": aggregate}
    if out_dir is not None:
        fields = list(rows[0].keys())
        agg_row = {"trial": "aggregate"}
        for f in fields[1:]:
            agg_row[f] = aggregate.get(f"{f}_mean")
        result["csv"] = str(
            write_csv(
                Path(out_dir) / "dynamic_comparison.csv",
                fields,
                rows + [agg_row],
                config_hash(cfg),
                cfg["seed"],
            )
        )
    return result


# --------------------------------------------------------------------------
# active exploration
# --------------------------------------------------------------------------


def _scores_by_scene(detector: Detector, corpus: Corpus) -> dict[str, np.ndarray]:
    matrix = detector.score_matrix(corpus.a_views)
    return {
        scene.scene_id: matrix[:, corpus.scene_view_slice(i)]
        for i, scene in enumerate(corpus.scenes)
    }


def _training_scene_mix(known_scenes, pseudo_scenes, fraction: float):
    """Known scenes plus pseudo-unknowns repeated to hit the target fraction."""
    if not pseudo_scenes or fraction <= 0:
        return list(known_scenes)
    target = round(fraction / (1.0 - fraction) * len(known_scenes))
    mix = list(known_scenes)
    for i in range(target):
        mix.append(pseudo_scenes[i % len(pseudo_scenes)])
    return mix


_ACTIVE_FIELDS = [
    "psi",
    "trial",
    "mean_actions",
    "known_accuracy",
    "unknown_recall",
    "unknown_precision",
    "mean_return",
]


def run_active_trials(cfg: dict, out_dir: str | Path | None = None) -> dict:
    """Train a policy per exploration exponent and evaluate greedy episodes."""
    corpus, train, val, test = prepare_splits(cfg)
    psi_list = [float(p) for p in cfg["reward"]["psi_list"]]
    agent_cfg = cfg["agent"]
    rows = []
    for trial in range(int(cfg["trials"])):
        setup = _prepare_openset_trial(cfg, corpus, train, val, trial)
        train_m = select_classes(train, setup.model_classes)
        train_p = (
            select_classes(train, setup.pseudo_classes) if setup.pseudo_classes else None
        )
        test_m = select_classes(test, setup.model_classes)
        test_u = select_classes(test, setup.unknown_classes)

        scores = _scores_by_scene(setup.detector, train_m)
        if train_p is not None:
            scores.update(_scores_by_scene(setup.detector, train_p))
        scores.update(_scores_by_scene(setup.detector, test_m))
        scores.update(_scores_by_scene(setup.detector, test_u))
        models = AgentModels(wsvm=setup.model, scores_by_scene=scores)
        training_scenes = _training_scene_mix(
            train_m.scenes,
            train_p.scenes if train_p is not None else [],
            float(agent_cfg["unknown_fraction"]),
        )
        eval_scenes = list(test_m.scenes) + list(test_u.scenes)
        known_names = set(setup.model_classes)

        for psi in psi_list:
            reward_spec = build_reward_spec(cfg, psi)
            qcfg = build_q_config(cfg, seed=derive_seed(cfg["seed"], "policy", trial, psi))
            policy, curve = train_policy(training_scenes, models, reward_spec, qcfg)
            eval_rng = np.random.default_rng(derive_seed(cfg["seed"], "eval", trial, psi))
            n_actions = []
            returns = []
            known_total = known_correct = 0
            unknown_total = unknown_rejected = 0
            rejected_total = rejected_unknown = 0
            per_scene = int(agent_cfg["eval_episodes_per_scene"])
            for scene in eval_scenes:
                for _ in range(per_scene):
                    traj = run_episode(
                        policy,
                        scene,
                        models,
                        reward_spec,
                        greedy=True,
                        rng=eval_rng,
                        start_view=int(eval_rng.integers(scene.n_views)),
                    )
                    n_actions.append(traj.n_actions)
                    returns.append(traj.episode_return)
                    is_known = scene.class_name in known_names
                    if is_known:
                        known_total += 1
                        known_correct += traj.outcome == "correct"
                    else:
                        unknown_total += 1
                        unknown_rejected += traj.outcome == "rejected"
                    if traj.outcome == "rejected":
                        rejected_total += 1
                        rejected_unknown += not is_known
            rows.append(
                {
                    "psi": psi,
                    "trial": trial,
                    "mean_actions": float(np.mean(n_actions)),
                    "known_accuracy": known_correct / known_total if known_total else None,
                    "unknown_recall": unknown_rejected / unknown_total if unknown_total else None,
                    "unknown_precision": rejected_unknown / rejected_total if rejected_total else None,
                    "mean_return": float(np.mean(returns)),
                }
            )
    per_psi = {}
    for psi in psi_list:
        psi_rows = [r for r in rows if r["psi"] == psi]
        per_psi[psi] = aggregate_rows(
            psi_rows,
            ["mean_actions", "known_accuracy", "unknown_recall", "unknown_precision", "mean_return"],
        )
    result = {"rows": rows, "per_psi": per_psi}
    if out_dir is not None:
        out_rows = list(rows)
        for psi in psi_list:
            agg = per_psi[psi]
            out_rows.append(
                {
                    "psi": psi,
                    "trial": "aggregate",
                    "mean_actions": agg["mean_actions_mean"],
                    "known_accuracy": agg["known_accuracy_mean"],
                    "unknown_recall": agg["unknown_recall_mean"],
                    "unknown_precision": agg["unknown_precision_mean"],
                    "mean_return": agg["mean_return_mean"],
                }
            )
        result["csv"] = str(
            write_csv(
                Path(out_dir) / "active_trials.csv",
                _ACTIVE_FIELDS,
                out_rows,
                config_hash(cfg),
                cfg["seed"],
            )
        )
    return result
