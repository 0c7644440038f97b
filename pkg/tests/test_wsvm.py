import numpy as np
import pytest

from scenekit.pbmf import ScenarioDictionary
from scenekit.wsvm import (
    UNKNOWN_INDEX,
    WsvmConfig,
    calibrate_thresholds,
    class_scores,
    decide_batch,
    explain_prediction,
    fit_wsvm,
    load_wsvm,
    save_wsvm,
    with_thresholds,
    wsvm_decide,
)


def three_cluster_data(seed=0, n=20, spread=0.35):
    rng = np.random.default_rng(seed)
    centers = np.array([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]])
    x = np.concatenate([c + spread * rng.standard_normal((n, 3)) for c in centers])
    y = np.repeat([0, 1, 2], n)
    return x, y, centers


@pytest.fixture(scope="module")
def fitted():
    x, y, centers = three_cluster_data()
    model = fit_wsvm(x, y, ["a", "b", "c"], WsvmConfig(nu=0.1, tail_fraction=0.5))
    return model, x, y, centers


def test_fit_contract_calibrations_present(fitted):
    model, x, y, _ = fitted
    assert len(model.classes) == 3
    for cal in model.classes:
        assert cal.inclusion.gamma > 0 and cal.inclusion.kappa > 0
        assert not cal.inclusion.reversed_
        assert not cal.positive.reversed_
        assert cal.negative.reversed_
    assert model.feature_dim == 3


def test_small_class_rejected():
    x = np.random.default_rng(0).standard_normal((16, 2))
    y = np.array([0] * 10 + [1] * 6)
    with pytest.raises(ValueError, match="'b' has 6"):
        fit_wsvm(x, y, ["a", "b"], WsvmConfig())


def test_closed_set_reduction_matches_argmax_oracle(fitted):
    model, x, _, _ = fitted
    model0 = with_thresholds(model, 0.0, 0.0)
    rng = np.random.default_rng(42)
    probes = rng.uniform(-4.0, 4.0, size=(1000, 3))
    p_o, products = class_scores(model0, probes)
    oracle = np.argmax(products, axis=1)
    decisions = decide_batch(model0, probes)
    assert all(not d.rejected for d in decisions)
    got = np.array([d.label for d in decisions])
    assert np.array_equal(got, oracle)


def test_delta_r_one_always_rejects(fitted):
    model = with_thresholds(fitted[0], 0.0, 1.0)
    rng = np.random.default_rng(1)
    probes = rng.uniform(-4.0, 4.0, size=(50, 3))
    assert all(d.rejected for d in decide_batch(model, probes))


def test_per_class_scores_gate(fitted):
    model, _, _, centers = fitted
    gated = with_thresholds(model, 0.5, 0.0)
    decision = wsvm_decide(gated, centers[0])
    # classes failing the inclusion gate contribute exactly zero
    assert np.all(decision.per_class[decision.p_o <= 0.5] == 0.0)


def test_in_class_products_beat_cross_class():
    for seed in range(5):
        x, y, centers = three_cluster_data(seed=seed)
        model = fit_wsvm(x, y, ["a", "b", "c"], WsvmConfig(nu=0.1, tail_fraction=0.5))
        _, products = class_scores(model, centers)
        for c in range(3):
            own = products[c, c]
            cross = np.delete(products[c], c).max()
            assert own > cross


def test_reject_far_samples_at_calibrated_thresholds():
    hits = 0
    for seed in range(10):
        x, y, _ = three_cluster_data(seed=seed)
        model = fit_wsvm(x, y, ["a", "b", "c"], WsvmConfig(nu=0.1, tail_fraction=0.5))
        rng = np.random.default_rng(1000 + seed)
        far = rng.normal(-3.0, 0.3, size=(20, 3))
        val = np.concatenate([x, far])
        val_labels = np.concatenate([y, np.full(20, UNKNOWN_INDEX)])
        d_o, d_r = calibrate_thresholds(model, val, val_labels)
        model_c = with_thresholds(model, d_o, d_r)
        test_far = rng.normal(-3.0, 0.3, size=(20, 3))
        rejected = np.mean([d.rejected for d in decide_batch(model_c, test_far)])
        hits += rejected >= 0.6
    assert hits >= 8


def test_calibrate_requires_unknowns(fitted):
    model, x, y, _ = fitted
    with pytest.raises(ValueError, match="unknown"):
        calibrate_thresholds(model, x, y)


def test_calibration_dominates_fixed_corner(fitted):
    model, x, y, _ = fitted
    rng = np.random.default_rng(3)
    far = rng.normal(-3.0, 0.4, size=(15, 3))
    val = np.concatenate([x, far])
    labels = np.concatenate([y, np.full(15, UNKNOWN_INDEX)])
    d_o, d_r = calibrate_thresholds(model, val, labels)

    def harmonic(mo):
        decisions = decide_batch(mo, val)
        preds = np.array([UNKNOWN_INDEX if d.rejected else d.label for d in decisions])
        known = labels != UNKNOWN_INDEX
        acc = float(np.mean(preds[known] == labels[known]))
        rec = float(np.mean(preds[~known] == UNKNOWN_INDEX))
        return 2 * acc * rec / (acc + rec) if acc + rec else 0.0

    assert harmonic(with_thresholds(model, d_o, d_r)) >= harmonic(
        with_thresholds(model, 0.1, 0.5)
    )


def test_unknown_far_from_support_rejected_strongly():
    x, y, _ = three_cluster_data(seed=2)
    model = fit_wsvm(x, y, ["a", "b", "c"], WsvmConfig(nu=0.1, tail_fraction=0.5))
    model = with_thresholds(model, 0.01, 0.05)
    far = np.full((10, 3), -6.0)
    assert all(d.rejected for d in decide_batch(model, far))


# ------------------------------------------------------------------- explain


def _toy_dictionary(k):
    w = np.zeros((6, k))
    for j in range(k):
        w[j % 6, j] = 1.0
    return ScenarioDictionary(
        w=w, object_names=[f"obj{i}" for i in range(6)], provenance=["initial"] * k
    )


def test_explain_hand_fixture():
    dic = _toy_dictionary(3)
    weights = np.array([2.0, -1.0, 0.5])
    fused = np.array([0.6, 0.9, 0.0])
    entries = explain_prediction(weights, fused, dic)
    assert entries[0].scenario == 0
    assert entries[0].influence == pytest.approx(1.2)
    assert entries[0].above_threshold  # influence > 1 is reportable
    assert not entries[1].above_threshold
    zero = [e for e in entries if e.scenario == 2][0]
    assert zero.influence == 0.0


def test_explain_zero_score_kills_influence():
    dic = _toy_dictionary(2)
    entries = explain_prediction(np.array([100.0, 1.0]), np.array([0.0, 0.5]), dic)
    assert [e.influence for e in entries] == [0.5, 0.0]


def test_explain_permutation_equivariance():
    dic = _toy_dictionary(4)
    rng = np.random.default_rng(0)
    weights = rng.normal(0, 1, 4)
    fused = rng.random(4)
    base = explain_prediction(weights, fused, dic)
    perm = np.array([2, 0, 3, 1])
    permuted = explain_prediction(weights[perm], fused[perm], dic.select(list(perm)))
    assert [round(e.influence, 12) for e in base] == [
        round(e.influence, 12) for e in permuted
    ]
    assert [e.members for e in base] == [e.members for e in permuted]


def test_explain_shape_mismatch():
    dic = _toy_dictionary(2)
    with pytest.raises(ValueError, match="shape"):
        explain_prediction(np.zeros(3), np.zeros(2), dic)


# --------------------------------------------------------------- persistence


def test_persistence_bit_faithful_decisions(tmp_path, fitted):
    model, x, _, _ = fitted
    model = with_thresholds(model, 0.01, 0.1)
    path = tmp_path / "model.json"
    save_wsvm(model, path)
    loaded = load_wsvm(path)
    assert loaded.class_names == model.class_names
    rng = np.random.default_rng(9)
    probes = rng.uniform(-4, 4, size=(200, 3))
    a = decide_batch(model, probes)
    b = decide_batch(loaded, probes)
    for da, db in zip(a, b):
        assert da.label == db.label
        assert np.array_equal(da.per_class, db.per_class)
        assert np.array_equal(da.p_o, db.p_o)


def test_load_rejects_other_files(tmp_path):
    p = tmp_path / "bogus.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="not a wsvm"):
        load_wsvm(p)
