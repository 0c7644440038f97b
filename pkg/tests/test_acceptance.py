"""Acceptance suite: one test per release criterion, each printing a
PASS line with the measured values once its assertions hold.

Run with ``pytest tests/test_acceptance.py -v -s``.  The synthetic-corpus
experiments (criteria 10-13) take a few minutes; everything else is fast.
"""

import math
import warnings

import numpy as np
import pytest

from scenekit.agent import Action, RewardSpec, SceneEnv, action_reward
from scenekit.config import load_config
from scenekit.dataset import GeneratorSpec, SceneEpisode, ViewObservation, generate_corpus
from scenekit.fusion import fuse_views, incremental_fuse
from scenekit.pbmf import (
    PbmfConfig,
    binarized_hamming_error,
    compute_idf_weights,
    pbmf_fit,
    pbmf_objective,
)
from scenekit.svm import fit_linear_svm_binary, fit_ocsvm
from scenekit.weibull import WeibullParams, fit_weibull_mle, sample_weibull, weibull_prob
from scenekit.wsvm import (
    WsvmConfig,
    class_scores,
    decide_batch,
    fit_wsvm,
    with_thresholds,
)

warnings.filterwarnings("ignore", category=UserWarning)

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def report(criterion: int, message: str) -> None:
    print(f"\n[PASS] criterion {criterion:2d}: {message}")


# --------------------------------------------------------------------------
# 1. IDF weight formula exactness
# --------------------------------------------------------------------------


def test_criterion_01_idf_formula_exactness():
    a5 = np.array(
        [
            [1, 1, 1, 1, 1],
            [1, 0, 0, 0, 0],
            [0, 0, 0, 0, 0],
            [1, 1, 0, 0, 0],
            [0, 1, 1, 1, 0],
        ],
        dtype=float,
    )
    omega = compute_idf_weights(a5).omega
    expected = np.full((5, 5), 0.5)
    for i in range(5):
        count = a5[i].sum()
        if count:
            value = 1.0 + math.log(5.0 / count)
            expected[i][a5[i] > 0] = max(value, 0.5)
    assert np.max(np.abs(omega - expected)) <= 1e-12
    # the 1 + ln(10) cell: an object present in 10 of 100 instances
    a100 = np.zeros((2, 100))
    a100[0, :10] = 1
    a100[1, :] = 1
    omega100 = compute_idf_weights(a100).omega
    assert abs(omega100[0, 0] - (1.0 + math.log(10.0))) <= 1e-12
    assert omega100[0, 0] == pytest.approx(3.302585092994046, abs=1e-12)
    assert omega100[0, 99] == 0.5
    report(1, "idf weights match hand values incl. 1+ln(10) and the 0.5 floor (1e-12)")


# --------------------------------------------------------------------------
# 2. Objective fixtures
# --------------------------------------------------------------------------


def test_criterion_02_objective_fixtures():
    cfg0 = PbmfConfig(k=2)
    z = pbmf_objective(
        np.zeros((3, 2)), np.zeros((3, 2)), np.zeros((2, 2)), np.full((3, 2), 0.5), cfg0
    )
    assert z.total == 0.0
    i2 = np.eye(2)
    cfg = PbmfConfig(k=2, alpha1=0, alpha2=0, alpha3=0.1, alpha4=0)
    ob = pbmf_objective(i2, i2, i2, compute_idf_weights(i2).omega, cfg)
    assert abs(ob.total - 0.2) <= 1e-9
    cfg2 = PbmfConfig(k=2, alpha1=0, alpha2=0, alpha3=0, alpha4=1.0)
    ob2 = pbmf_objective(
        np.array([[1.0]]),
        np.array([[1.0, 1.0]]),
        np.array([[1.0], [1.0]]),
        np.array([[1.0]]),
        cfg2,
    )
    assert abs(ob2.p0 - 4e-4) <= 1e-9
    assert abs(ob2.p4 - 2.0) <= 1e-9
    report(2, "zero case, identity total 0.2, clamp case p0=4e-4/p4=2 (1e-9)")


# --------------------------------------------------------------------------
# 3. Optimizer monotonicity
# --------------------------------------------------------------------------


def test_criterion_03_optimizer_monotonicity():
    violations = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(8, 41))
        n = int(rng.integers(10, 81))
        k = int(rng.integers(2, 7))
        a = (rng.random((m, n)) < rng.uniform(0.15, 0.5)).astype(float)
        _, _, history = pbmf_fit(a, PbmfConfig(k=k, seed=seed, max_iters=120))
        violations += sum(1 for x, y in zip(history, history[1:]) if y > x + 1e-9)
    assert violations == 0
    report(3, "accepted-step objectives non-increasing (1e-9) on 20 random problems")


# --------------------------------------------------------------------------
# 4. Planted recovery
# --------------------------------------------------------------------------


def _planted_spec(seed):
    vocab = [f"o{i}" for i in range(30)]
    templates = [
        [["o0", "o1", "o2", "o3", "o4"], ["o5", "o6", "o7"]],
        [["o8", "o9", "o10", "o11"], ["o12", "o13", "o14", "o15", "o16"]],
        [["o17", "o18", "o19", "o20", "o21", "o22"]],
    ]
    return GeneratorSpec(
        3, 5, vocab, templates, views_per_scene=4, template_rate=0.6, seed=seed
    )


def test_criterion_04_planted_recovery():
    errors = []
    for seed in range(5):
        corpus = generate_corpus(_planted_spec(seed))
        assert corpus.a_views.shape == (30, 60)
        assert corpus.planted.w.shape[1] == 5
        d, e, _ = pbmf_fit(corpus.a_views.astype(float), PbmfConfig(k=5, seed=seed))
        errors.append(binarized_hamming_error(corpus.a_views, d.w, e.h))
    assert max(errors) <= 0.05
    report(4, f"planted m=30,k=5,n=60 hamming errors {[round(e, 4) for e in errors]} <= 5%")


# --------------------------------------------------------------------------
# 5. Weibull closed forms and MLE recovery
# --------------------------------------------------------------------------


def test_criterion_05_weibull():
    p = WeibullParams(v=1.3, gamma=0.8, kappa=2.5)
    r = WeibullParams(v=1.3, gamma=0.8, kappa=2.5, reversed_=True)
    assert abs(weibull_prob(p, 1.3) - 0.0) <= 1e-12
    assert abs(weibull_prob(r, 1.3) - 1.0) <= 1e-12
    assert abs(weibull_prob(p, 1.3 + 0.8) - (1.0 - math.exp(-1.0))) <= 1e-12
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        data = sample_weibull(rng, kappa=2.0, gamma=1.5, v=0.0, size=2000)
        fit = fit_weibull_mle(data)
        worst = max(worst, abs(fit.kappa - 2.0) / 2.0, abs(fit.gamma - 1.5) / 1.5)
    assert worst <= 0.10
    report(5, f"closed-form points exact (1e-12); worst MLE relative error {worst:.3f} <= 10%")


# --------------------------------------------------------------------------
# 6. Closed-set reduction of the open-set decision
# --------------------------------------------------------------------------


def test_criterion_06_closed_set_reduction():
    rng = np.random.default_rng(0)
    centers = np.array([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]])
    x = np.concatenate([c + 0.35 * rng.standard_normal((20, 3)) for c in centers])
    y = np.repeat([0, 1, 2], 20)
    model = fit_wsvm(x, y, ["a", "b", "c"], WsvmConfig(nu=0.1, tail_fraction=0.5))
    model = with_thresholds(model, 0.0, 0.0)
    probes = rng.uniform(-4.0, 4.0, size=(1000, 3))
    _, products = class_scores(model, probes)
    oracle = np.argmax(products, axis=1)
    decisions = decide_batch(model, probes)
    assert all(not d.rejected for d in decisions)
    agreement = np.mean(np.array([d.label for d in decisions]) == oracle)
    assert agreement == 1.0
    report(6, "zero-threshold decisions equal the product-argmax oracle on 1000 probes")


# --------------------------------------------------------------------------
# 7. SVM solver contracts
# --------------------------------------------------------------------------


def test_criterion_07_svm_contracts():
    tol = 1e-4
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 81))
        d = int(rng.integers(2, 6))
        nu = float(rng.choice([0.05, 0.1, 0.2, 0.3]))
        x = rng.standard_normal((n, d)) * rng.uniform(0.3, 1.0)
        model = fit_ocsvm(x, nu=nu, tol=tol)
        scores = model.decision(x)
        # points within solver tolerance of the boundary are support
        # vectors, not outliers
        outlier_frac = float(np.mean(scores < -tol))
        sv_frac = len(model.alpha) / n
        assert outlier_frac <= nu + 1.0 / n
        assert sv_frac >= nu - 1.0 / n
    worst_gap = 0.0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(40, 90))
        x = rng.standard_normal((n, 4))
        y = np.where(x @ rng.standard_normal(4) > 0, 1.0, -1.0)
        if len(np.unique(y)) < 2:
            y[0] = -y[0]
        model = fit_linear_svm_binary(x, y, c=1.0, tol=1e-4, seed=seed)
        worst_gap = max(worst_gap, model.gap)
    assert worst_gap <= 1e-4
    report(
        7,
        f"nu-properties hold within 1/n on 10 fits; worst duality gap {worst_gap:.2e} <= 1e-4",
    )


# --------------------------------------------------------------------------
# 8. Fusion algebra
# --------------------------------------------------------------------------


def test_criterion_08_fusion_algebra():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        k = int(rng.integers(1, 8))
        count = int(rng.integers(2, 5))
        vecs = [rng.random(k) for _ in range(count)]
        batch = fuse_views(vecs)
        perm = rng.permutation(count)
        shuffled = fuse_views([vecs[i] for i in perm], view_indices=perm)
        assert np.array_equal(batch.values, shuffled.values)  # commutativity
        left = fuse_views([fuse_views(vecs[:2]).values] + vecs[2:])
        assert np.array_equal(batch.values, left.values)  # associativity
        folded = fuse_views([vecs[0]], view_indices=[0])
        for i, v in enumerate(vecs[1:], start=1):
            prev = folded
            folded = incremental_fuse(folded, v, i)
            assert np.all(folded.values >= prev.values)  # monotonicity
        assert np.array_equal(folded.values, batch.values)  # fold == batch
        again = incremental_fuse(folded, vecs[-1], count - 1)
        assert again is folded  # idempotence
    report(8, "commutative/associative/idempotent/monotone + fold==batch on 1000 sets")


# --------------------------------------------------------------------------
# 9. Reward table exactness through the environment
# --------------------------------------------------------------------------


class _TinyEpisodeFactory:
    """Real classifier over 1-D fused scores, with controllable truth."""

    def __init__(self):
        rng = np.random.default_rng(0)
        a = 0.9 + 0.02 * rng.standard_normal(30)
        b = 0.1 + 0.02 * rng.standard_normal(30)
        x = np.clip(np.concatenate([a, b]), 0, 1)[:, None]
        y = np.repeat([0, 1], 30)
        self.model = fit_wsvm(x, y, ["a", "b"], WsvmConfig(nu=0.2, tail_fraction=0.5))

    def env(self, class_name: str, psi: float) -> SceneEnv:
        views = [ViewObservation(v, np.zeros(1, dtype=np.int8)) for v in range(8)]
        episode = SceneEpisode("t", class_name, views, np.zeros(8, dtype=bool))
        scores = np.full((1, 8), 0.9)  # every view looks like class "a"
        return SceneEnv(episode, scores, self.model, RewardSpec(psi=psi))


def test_criterion_09_reward_table():
    factory = _TinyEpisodeFactory()
    for psi in (0.0, 1.5):
        spec = RewardSpec(psi=psi)
        for remaining in range(8):
            bonus = 0.0 if remaining == 0 else float(remaining) ** psi
            assert action_reward(Action.PREDICT, True, False, remaining, spec) == 8.0 + bonus
            assert action_reward(Action.PREDICT, False, False, remaining, spec) == -8.0
            assert action_reward(Action.REJECT, True, False, remaining, spec) == -8.0
            assert action_reward(Action.REJECT, False, True, remaining, spec) == 8.0 + bonus
            for move in (Action.MOVE_NEAREST, Action.MOVE_FURTHEST):
                assert action_reward(move, True, False, remaining, spec) == -1.0
        # end-to-end through env_step: remaining = 7 - moves at decision time
        for moves in range(8):
            env = factory.env("a", psi)
            env.reset(0)
            for _ in range(moves):
                _, r_move, _ = env.step(Action.MOVE_NEAREST)
                assert r_move == -1.0  # moving away from a correct prediction
            _, r, done = env.step(Action.PREDICT)
            remaining = 7 - moves
            bonus = 0.0 if remaining == 0 else float(remaining) ** psi
            assert done and r == pytest.approx(8.0 + bonus, abs=1e-12)
        env = factory.env("b", psi)
        env.reset(0)
        _, r, _ = env.step(Action.PREDICT)  # model says "a", truth is "b"
        assert r == -8.0
        env = factory.env("a", psi)
        env.reset(0)
        _, r, _ = env.step(Action.REJECT)
        assert r == -8.0  # wrongful reject
        env = factory.env("zzz", psi)
        env.reset(0)
        _, r, _ = env.step(Action.REJECT)
        assert r == pytest.approx(8.0 + 7.0**psi, abs=1e-12)
    spec = RewardSpec(psi=1.5)
    assert action_reward(Action.PREDICT, True, False, 3, spec) == pytest.approx(
        13.196152422706632, abs=1e-9
    )
    report(9, "reward constants exact for remaining 0..7, psi in {0, 1.5}; 8+3^1.5 = 13.196")


# --------------------------------------------------------------------------
# 10-13. Synthetic-corpus experiment directions
# --------------------------------------------------------------------------


def test_criterion_10_exploration_tradeoff_direction():
    from scenekit.experiments import run_active_trials

    cfg = load_config()
    cfg["trials"] = 10
    cfg["corpus"]["template_rate"] = 0.5
    cfg["agent"]["episodes"] = 3000
    cfg["reward"]["psi_list"] = [0.0, 1.5]
    res = run_active_trials(cfg)
    m0 = res["per_psi"][0.0]["mean_actions_mean"]
    m15 = res["per_psi"][1.5]["mean_actions_mean"]
    a0 = res["per_psi"][0.0]["known_accuracy_mean"]
    a15 = res["per_psi"][1.5]["known_accuracy_mean"]
    assert m0 - m15 >= 1.0
    assert abs(a0 - a15) <= 0.1
    report(
        10,
        f"mean actions {m15:.2f} (psi=1.5) vs {m0:.2f} (psi=0), margin {m0 - m15:.2f} >= 1; "
        f"accuracy gap {abs(a0 - a15):.3f} <= 0.1",
    )


def test_criterion_11_dynamic_dictionary_direction():
    from scenekit.experiments import run_dynamic_comparison

    cfg = load_config()
    cfg["trials"] = 5
    cfg["corpus"].update({"num_classes": 10, "scenes_per_class": 16})
    cfg["split"] = {"train": 10, "val": 3, "test": 3, "seed": 2}
    res = run_dynamic_comparison(cfg)
    ratios = [row["error_ratio"] for row in res["rows"]]
    gaps = [row["all_view_gap"] for row in res["rows"]]
    assert all(
        row["reconstruction_error_static"] <= row["reconstruction_error_dynamic"]
        for row in res["rows"]
    )
    assert res["aggregate"]["error_ratio_mean"] <= 1.5
    assert res["aggregate"]["all_view_gap_mean"] <= 0.05
    report(
        11,
        f"dynamic/static error ratio mean {res['aggregate']['error_ratio_mean']:.3f} <= 1.5 "
        f"(per-trial {[round(r, 2) for r in ratios]}); all-view gap mean "
        f"{res['aggregate']['all_view_gap_mean']:.3f} <= 0.05",
    )


def test_criterion_12_object_noise_direction():
    from scenekit.experiments import run_closed_set

    margins = []
    for seed in range(5):
        cfg = load_config()
        cfg["seed"] = seed
        cfg["corpus"].update({"num_classes": 10, "scenes_per_class": 16, "seed": 30 + seed})
        cfg["split"] = {"train": 10, "val": 3, "test": 3, "seed": 2}
        cfg["detector"] = {
            "mode": "noisy",
            "noise_sigma": 1.5,
            "flip_rate": 0.1,
            "seed": 50 + seed,
        }
        res = run_closed_set(cfg)
        rows = {r["method"]: r for r in res["rows"]}
        gt = rows["ground_truth_objects+logistic"]["single_view_accuracy"]
        noisy = rows["noisy_objects+logistic"]["single_view_accuracy"]
        margins.append(gt - noisy)
    assert all(m >= 0 for m in margins)
    report(
        12,
        f"ground-truth objects >= noisy objects in all 5 runs "
        f"(margins {[round(m, 3) for m in margins]})",
    )


def test_criterion_13_open_set_suite():
    from scenekit.experiments import run_open_set_trials

    cfg = load_config()
    cfg["trials"] = 10
    cfg["corpus"]["template_overlap_rate"] = 0.0
    cfg["detector"] = {"mode": "oracle", "noise_sigma": 0.0, "flip_rate": 0.0, "seed": 4}
    res = run_open_set_trials(cfg)
    known = res["aggregate"]["known_accuracy_mean"]
    recall = res["aggregate"]["unknown_recall_mean"]
    assert known >= 0.75
    assert recall >= 0.6
    report(
        13,
        f"oracle open-set: known accuracy {known:.3f} >= 0.75, unknown recall {recall:.3f} >= 0.6",
    )


# --------------------------------------------------------------------------
# 14. Byte-level reproducibility of CLI runs
# --------------------------------------------------------------------------


def test_criterion_14_cli_reproducibility(tmp_path):
    import yaml

    from scenekit.cli import main

    cfg = {
        "seed": 5,
        "trials": 2,
        "corpus": {"num_classes": 5, "scenes_per_class": 8, "vocabulary_size": 36},
        "split": {"train": 5, "val": 1, "test": 2, "seed": 2},
        "pbmf": {"k": 8, "max_iters": 120},
        "logistic": {"epochs": 150},
        "openset": {"known_classes": 4, "pseudo_unknown_classes": 1},
    }
    cfg_path = tmp_path / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    for command, name in (("eval-closed", "closed_set.csv"), ("eval-open", "open_set_trials.csv")):
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{command}-{run}"
            assert main(["--config", str(cfg_path), "--out-dir", str(out), command]) == 0
            outs.append((out / name).read_bytes())
        assert outs[0] == outs[1]
    report(14, "repeated CLI runs produce byte-identical CSV files")
