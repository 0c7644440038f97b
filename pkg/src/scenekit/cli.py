"""Command-line entry points.

Every subcommand takes ``--config`` (YAML, see ``scenekit.config``) plus the
``--seed`` / ``--out-dir`` / ``--trials`` overrides, and writes CSV reports
whose header comment embeds the tool version, config hash, and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .agent import save_policy, train_policy
from .config import (
    build_detector_spec,
    build_pbmf_config,
    build_q_config,
    build_reward_spec,
    build_wsvm_config,
    config_hash,
    derive_seed,
    load_config,
)
from .dataset import persist_corpus, select_classes
from .detector import DetectorSpec, evaluate_detector, make_detector
from .experiments import (
    _scores_by_scene,
    _training_scene_mix,
    learn_dictionary,
    prepare_splits,
    run_active_trials,
    run_closed_set,
    run_dynamic_comparison,
    run_open_set_trials,
)
from .features import all_view_features, sample_fused_features
from .logistic import fit_logistic, predict
from .pbmf import refinement_loop
from .reporting import load_dictionary_csv, write_csv, write_dictionary
from .wsvm import (
    UNKNOWN_INDEX,
    calibrate_thresholds,
    explain_prediction,
    fit_wsvm,
    load_wsvm,
    save_wsvm,
    with_thresholds,
    wsvm_decide,
)
from .agent import AgentModels


def _out_dir(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(cfg, args) -> int:
    from .experiments import resolve_corpus

    corpus = resolve_corpus(cfg)
    out = _out_dir(cfg) / "corpus"
    persist_corpus(corpus, out)
    print(
        f"wrote corpus: {corpus.n_objects} objects, {corpus.n_scenes} scenes, "
        f"{corpus.n_views} views -> {out}"
    )
    return 0


def cmd_factorize(cfg, args) -> int:
    corpus, train, val, test = prepare_splits(cfg)
    out = _out_dir(cfg)
    pcfg = build_pbmf_config(cfg, seed=derive_seed(cfg["seed"], "factorize"))
    if args.refine_rounds > 0:
        det_spec = build_detector_spec(cfg)
        provider = lambda w_binary: make_detector(w_binary, det_spec)
        result = refinement_loop(
            train.a_views,
            train.view_labels(),
            val.a_views,
            val.view_labels(),
            provider,
            pcfg,
            max_rounds=args.refine_rounds,
            patience=int(cfg["refinement"]["patience"]),
            object_names=corpus.object_vocabulary,
        )
        dictionary, encoding = result.dictionary, result.encoding
        round_rows = [
            {
                "round": r.round_index,
                "p0": r.objective.p0,
                "p1": r.objective.p1,
                "p2": r.objective.p2,
                "p3": r.objective.p3,
                "p4": r.objective.p4,
                "total": r.objective.total,
                "k": r.k,
                "val_accuracy": r.val_accuracy,
            }
            for r in result.rounds
        ]
        write_csv(
            out / "rounds.csv",
            ["round", "p0", "p1", "p2", "p3", "p4", "total", "k", "val_accuracy"],
            round_rows,
            config_hash(cfg),
            cfg["seed"],
        )
        print(f"refinement best round: {result.best_round}")
    else:
        dictionary, encoding = learn_dictionary(
            train.a_views, pcfg, object_names=corpus.object_vocabulary
        )
    write_dictionary(dictionary, encoding, out, config_hash(cfg), cfg["seed"])
    print(f"wrote dictionary with {dictionary.k} scenarios -> {out}")
    return 0


def _dictionary_from(cfg, args, corpus, train):
    if getattr(args, "dictionary", None):
        return load_dictionary_csv(args.dictionary)
    pcfg = build_pbmf_config(cfg, seed=derive_seed(cfg["seed"], "factorize"))
    dictionary, _ = learn_dictionary(
        train.a_views, pcfg, object_names=corpus.object_vocabulary
    )
    return dictionary


def cmd_detect_eval(cfg, args) -> int:
    corpus, train, val, test = prepare_splits(cfg)
    out = _out_dir(cfg)
    dictionary = _dictionary_from(cfg, args, corpus, train)
    det = make_detector(dictionary, build_detector_spec(cfg))
    oracle = make_detector(dictionary, DetectorSpec(mode="oracle"))
    truth = np.stack(
        [oracle.truth_bits(test.a_views[:, j]) for j in range(test.n_views)], axis=1
    )
    report = evaluate_detector(det, test.a_views, truth)
    rows = [
        {"scenario": j, "positives": report.positives[j], "average_precision": ap}
        for j, ap in enumerate(report.per_scenario_ap)
    ]
    rows.append(
        {"scenario": "mean", "positives": "", "average_precision": report.mean_ap}
    )
    write_csv(
        out / "detector_eval.csv",
        ["scenario", "positives", "average_precision"],
        rows,
        config_hash(cfg),
        cfg["seed"],
    )
    print(
        f"mAP={report.mean_ap} over {dictionary.k - report.n_excluded} scenarios "
        f"({report.n_excluded} without positives excluded)"
    )
    return 0


def cmd_train_openset(cfg, args) -> int:
    corpus, train, val, test = prepare_splits(cfg)
    out = _out_dir(cfg)
    dictionary = _dictionary_from(cfg, args, corpus, train)
    det = make_detector(dictionary, build_detector_spec(cfg))
    rng = np.random.default_rng(derive_seed(cfg["seed"], "openset-features"))
    samples = int(cfg["wsvm"]["samples_per_scene"])
    n_pseudo = int(cfg["openset"]["pseudo_unknown_classes"])

    feats, labels = sample_fused_features(
        det.score_matrix(train.a_views), train.scenes, train.scene_labels(), rng, samples
    )
    wcfg = build_wsvm_config(cfg, seed=derive_seed(cfg["seed"], "wsvm"))
    model = fit_wsvm(feats, labels, corpus.class_names, wcfg)

    if n_pseudo > 0 and len(corpus.class_names) - n_pseudo >= 2:
        # calibrate on a reduced model with held-out classes acting as unknowns,
        # then carry the thresholds over to the full model
        cal_classes = corpus.class_names[:-n_pseudo]
        pseudo_classes = corpus.class_names[-n_pseudo:]
        train_c = select_classes(train, cal_classes)
        f_c, y_c = sample_fused_features(
            det.score_matrix(train_c.a_views),
            train_c.scenes,
            train_c.scene_labels(),
            np.random.default_rng(derive_seed(cfg["seed"], "cal-features")),
            samples,
        )
        cal_model = fit_wsvm(f_c, y_c, cal_classes, wcfg)
        val_c = select_classes(val, cal_classes)
        val_p = select_classes(val, pseudo_classes)
        cal_feats = all_view_features(
            det.score_matrix(val_c.a_views), val_c.n_scenes, val_c.views_per_scene
        )
        cal_labels = val_c.scene_labels()
        pseudo_feats = all_view_features(
            det.score_matrix(val_p.a_views), val_p.n_scenes, val_p.views_per_scene
        )
        cal_feats = np.concatenate([cal_feats, pseudo_feats], axis=0)
        cal_labels = np.concatenate([cal_labels, np.full(val_p.n_scenes, UNKNOWN_INDEX)])
        delta_o, delta_r = calibrate_thresholds(cal_model, cal_feats, cal_labels)
        model = with_thresholds(model, delta_o, delta_r)
        print(f"calibrated thresholds: delta_o={delta_o} delta_r={delta_r}")
    path = out / "wsvm.json"
    save_wsvm(model, path)
    print(f"wrote open-set model for {len(model.class_names)} classes -> {path}")
    return 0


def cmd_train_agent(cfg, args) -> int:
    corpus, train, val, test = prepare_splits(cfg)
    out = _out_dir(cfg)
    dictionary = _dictionary_from(cfg, args, corpus, train)
    det = make_detector(dictionary, build_detector_spec(cfg))
    if args.model:
        model = load_wsvm(args.model)
    else:
        rng = np.random.default_rng(derive_seed(cfg["seed"], "openset-features"))
        feats, labels = sample_fused_features(
            det.score_matrix(train.a_views),
            train.scenes,
            train.scene_labels(),
            rng,
            int(cfg["wsvm"]["samples_per_scene"]),
        )
        wcfg = build_wsvm_config(cfg, seed=derive_seed(cfg["seed"], "wsvm"))
        model = fit_wsvm(feats, labels, corpus.class_names, wcfg)

    known = [c for c in model.class_names if c in set(corpus.class_names)]
    pseudo = [c for c in corpus.class_names if c not in set(model.class_names)]
    train_known = select_classes(train, known)
    scores = _scores_by_scene(det, train_known)
    pseudo_scenes = []
    if pseudo:
        train_pseudo = select_classes(train, pseudo)
        scores.update(_scores_by_scene(det, train_pseudo))
        pseudo_scenes = train_pseudo.scenes
    models = AgentModels(wsvm=model, scores_by_scene=scores, detector=det)
    mix = _training_scene_mix(
        train_known.scenes, pseudo_scenes, float(cfg["agent"]["unknown_fraction"])
    )
    psi = args.psi if args.psi is not None else float(cfg["reward"]["psi_list"][0])
    reward_spec = build_reward_spec(cfg, psi)
    qcfg = build_q_config(cfg, seed=derive_seed(cfg["seed"], "policy", psi))
    policy, curve = train_policy(mix, models, reward_spec, qcfg)
    save_policy(policy, qcfg, out / "policy.json")
    write_csv(
        out / "training_curve.csv",
        ["episode", "return", "epsilon"],
        [{"episode": e, "return": r, "epsilon": eps} for e, r, eps in curve],
        config_hash(cfg),
        cfg["seed"],
    )
    print(f"trained policy (psi={psi}) over {qcfg.episodes} episodes -> {out / 'policy.json'}")
    return 0


def cmd_explain(cfg, args) -> int:
    corpus, train, val, test = prepare_splits(cfg)
    out = _out_dir(cfg)
    dictionary = _dictionary_from(cfg, args, corpus, train)
    det = make_detector(dictionary, build_detector_spec(cfg))
    scene = None
    for s in list(test.scenes) + list(val.scenes) + list(train.scenes):
        if args.scene_id is None or s.scene_id == args.scene_id:
            scene = s
            break
    if scene is None:
        print(f"scene {args.scene_id!r} not found", file=sys.stderr)
        return 2
    block = np.stack([det.score_view(v.object_presence) for v in scene.views], axis=1)
    fused = block.max(axis=1)

    if cfg["classifier"] == "wsvm":
        rng = np.random.default_rng(derive_seed(cfg["seed"], "openset-features"))
        feats, labels = sample_fused_features(
            det.score_matrix(train.a_views),
            train.scenes,
            train.scene_labels(),
            rng,
            int(cfg["wsvm"]["samples_per_scene"]),
        )
        model = fit_wsvm(
            feats, labels, corpus.class_names,
            build_wsvm_config(cfg, seed=derive_seed(cfg["seed"], "wsvm")),
        )
        decision = wsvm_decide(model, fused)
        predicted = decision.label if decision.label is not None else decision.forced
        weights = model.classes[predicted].linear.w
    else:
        from .logistic import LogisticConfig

        lg = cfg["logistic"]
        s_train = det.score_matrix(train.a_views)
        model = fit_logistic(
            s_train.T,
            train.view_labels(),
            len(corpus.class_names),
            LogisticConfig(float(lg["learning_rate"]), int(lg["epochs"]), float(lg["l2"])),
        )
        predicted = int(predict(model, fused))
        weights = model.weights[predicted]

    entries = explain_prediction(weights, fused, dictionary)
    rows = [
        {
            "scenario": e.scenario,
            "influence": e.influence,
            "reportable": int(e.above_threshold),
            "objects": " ".join(e.members),
        }
        for e in entries
    ]
    write_csv(
        out / "explain.csv",
        ["scenario", "influence", "reportable", "objects"],
        rows,
        config_hash(cfg),
        cfg["seed"],
    )
    print(f"scene {scene.scene_id} (true class {scene.class_name}) "
          f"predicted {corpus.class_names[predicted]}")
    for e in entries[:5]:
        flag = "*" if e.above_threshold else " "
        print(f" {flag} scenario_{e.scenario:03d} influence={e.influence:+.3f} "
              f"objects: {' '.join(e.members)}")
    return 0


def cmd_eval(runner):
    def run(cfg, args) -> int:
        result = runner(cfg, _out_dir(cfg))
        print(f"wrote {result['csv']}")
        return 0

    return run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scenekit",
        description="scenario dictionaries, open-set scene classification, active view selection",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out-dir", help="override the output directory")
    parser.add_argument("--trials", type=int, help="override the trial count")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen", help="generate and persist a corpus")
    p = sub.add_parser("factorize", help="learn a scenario dictionary from the training split")
    p.add_argument("--refine-rounds", type=int, default=0, help="detector-feedback refinement rounds")
    p = sub.add_parser("detect-eval", help="average precision of the configured detector")
    p.add_argument("--dictionary", help="w.csv from a previous factorize run")
    p = sub.add_parser("train-openset", help="fit and calibrate the open-set classifier")
    p.add_argument("--dictionary", help="w.csv from a previous factorize run")
    p = sub.add_parser("train-agent", help="train the exploration policy")
    p.add_argument("--dictionary", help="w.csv from a previous factorize run")
    p.add_argument("--model", help="wsvm.json from a previous train-openset run")
    p.add_argument("--psi", type=float, help="exploration exponent (default: first of psi_list)")
    sub.add_parser("eval-closed", help="closed-set accuracy rows")
    sub.add_parser("eval-open", help="open-set known/unknown trials")
    sub.add_parser("eval-dynamic", help="static vs dynamic dictionary comparison")
    sub.add_parser("eval-active", help="active exploration sweeps over psi")
    p = sub.add_parser("explain", help="influence report for one scene")
    p.add_argument("--dictionary", help="w.csv from a previous factorize run")
    p.add_argument("--scene-id", help="scene to explain (default: first test scene)")

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir, trials=args.trials)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    commands = {
        "gen": cmd_gen,
        "factorize": cmd_factorize,
        "detect-eval": cmd_detect_eval,
        "train-openset": cmd_train_openset,
        "train-agent": cmd_train_agent,
        "eval-closed": cmd_eval(run_closed_set),
        "eval-open": cmd_eval(run_open_set_trials),
        "eval-dynamic": cmd_eval(run_dynamic_comparison),
        "eval-active": cmd_eval(run_active_trials),
        "explain": cmd_explain,
    }
    try:
        return commands[args.command](cfg, args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
