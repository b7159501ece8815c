import math

import numpy as np
import pytest

from pkgsleuth.errors import NoBenignSamples, SingleClassData
from pkgsleuth.model import train_model
from pkgsleuth.training import (
    ATConfig,
    EvaluationReport,
    ThresholdedDetector,
    adversarial_train,
    select_top_adversarial,
    stratified_folds,
    train,
    tune_threshold,
)


def brute_force_threshold(scores, labels, target):
    """Exhaustive search over observed scores plus the over-1 sentinel."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    benign = scores[labels == 0]
    malicious = scores[labels == 1]
    candidates = sorted(set(scores)) + [math.nextafter(1.0, 2.0)]
    feasible = [t for t in candidates if (benign >= t).mean() <= target]
    best = None
    for t in feasible:
        tpr = (malicious >= t).mean() if malicious.size else 0.0
        if best is None or tpr > best[0] or (tpr == best[0] and t < best[1]):
            best = (tpr, t)
    return best[1]


def test_tune_threshold_zero_fpr_example():
    scores = [0.1, 0.2, 0.9]
    labels = [0, 0, 1]
    t = tune_threshold(scores, labels, 0.0)
    assert t > 0.2
    assert (np.array([0.9]) >= t).all()  # TPR stays 1


def test_tune_threshold_full_fpr_example():
    scores = [0.1, 0.2, 0.9]
    labels = [0, 0, 1]
    assert tune_threshold(scores, labels, 1.0) == 0.1


def test_tune_threshold_requires_benign():
    with pytest.raises(NoBenignSamples):
        tune_threshold([0.5], [1], 0.01)


def test_tune_threshold_sentinel_when_unattainable():
    scores = [0.9, 0.9, 0.1]
    labels = [0, 0, 1]
    t = tune_threshold(scores, labels, 0.0)
    assert t > 1.0  # no observed score excludes all benign


def test_tune_threshold_matches_brute_force_randomized():
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = rng.integers(4, 40)
        scores = np.round(rng.random(n), 3)
        labels = rng.integers(0, 2, n)
        if labels.sum() == n:
            labels[0] = 0
        target = float(rng.choice([0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 1.0]))
        got = tune_threshold(scores, labels, target)
        want = brute_force_threshold(scores, labels, target)
        assert got == want, (scores.tolist(), labels.tolist(), target)
        benign = scores[labels == 0]
        assert (benign >= got).mean() <= target


def test_evaluation_perfect_detector():
    scores = [0.1, 0.2, 0.8, 0.9]
    labels = [0, 0, 1, 1]
    report = EvaluationReport.from_scores(scores, labels, 0.5)
    assert (report.fp, report.fn) == (0, 0)
    assert report.f1 == 1.0


def test_evaluation_all_benign_predictions():
    report = EvaluationReport.from_scores([0.1, 0.2], [1, 1], 0.9)
    assert report.recall == 0.0
    assert report.precision == 0.0  # zero predicted positives -> 0 by convention


def test_evaluation_metrics_recomputable():
    rng = np.random.default_rng(9)
    scores = rng.random(300)
    labels = rng.integers(0, 2, 300)
    report = EvaluationReport.from_scores(scores, labels, 0.4)
    tp, fp, fn, tn = report.tp, report.fp, report.fn, report.tn
    assert tp + fp + fn + tn == 300
    assert abs(report.accuracy - (tp + tn) / 300) < 1e-9
    assert abs(report.precision - (tp / (tp + fp) if tp + fp else 0.0)) < 1e-9
    assert abs(report.recall - (tp / (tp + fn) if tp + fn else 0.0)) < 1e-9
    p, r = report.precision, report.recall
    assert abs(report.f1 - (2 * p * r / (p + r) if p + r else 0.0)) < 1e-9


def test_roc_monotone():
    rng = np.random.default_rng(17)
    scores = rng.random(200)
    labels = rng.integers(0, 2, 200)
    report = EvaluationReport.from_scores(scores, labels, 0.5)
    fprs = [p[0] for p in report.roc]
    tprs = [p[1] for p in report.roc]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)


def test_stratified_folds_deterministic_and_balanced():
    labels = np.array([0] * 50 + [1] * 50)
    a = stratified_folds(labels, 5, 7)
    b = stratified_folds(labels, 5, 7)
    assert np.array_equal(a, b)
    for fold in range(5):
        mask = a == fold
        assert labels[mask].sum() == 10
        assert (~labels[mask].astype(bool)).sum() == 10


def separable_store(n=100, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 384)) * 0.01
    y = np.arange(n) % 2
    X[:, 10] += y * 3.0
    return X, y.astype(int)


def test_train_separable_perfect_tpr():
    X, y = separable_store()
    result = train(X, y, "decision_tree", grid={"max_depth": [4]}, seed=3, schema_hash="h")
    assert result.mean_val_tpr() == 1.0
    assert len(result.fold_models) == 5


def test_train_label_shuffle_is_chance():
    X, _ = separable_store(n=200, seed=5)
    rng = np.random.default_rng(123)
    y = rng.permutation(np.arange(200) % 2)
    result = train(X, y, "decision_tree", grid={"max_depth": [4]}, seed=3, schema_hash="h")
    # at 1% FPR, a useless model detects about as often as the FPR allows
    assert result.mean_val_tpr() <= 0.06


def test_train_single_class_rejected():
    X = np.zeros((10, 384))
    with pytest.raises(SingleClassData):
        train(X, np.ones(10, dtype=int), "decision_tree", grid={"max_depth": [2]})


def test_train_same_seed_identical_models():
    X, y = separable_store(seed=8)
    a = train(X, y, "gradient_boosted", grid={"max_depth": [3], "n_trees": [10], "learning_rate": [0.3]},
              seed=4, schema_hash="h")
    b = train(X, y, "gradient_boosted", grid={"max_depth": [3], "n_trees": [10], "learning_rate": [0.3]},
              seed=4, schema_hash="h")
    probe = np.random.default_rng(0).random((50, 384))
    for ma, mb in zip(a.fold_models, b.fold_models):
        assert np.array_equal(ma.predict_score(probe), mb.predict_score(probe))


def test_thresholded_detector_calibration(tmp_path):
    X, y = separable_store(seed=2)
    model = train_model("decision_tree", X, y, {"max_depth": 4}, "h", 0)
    detector = ThresholdedDetector.tune(model, X, y, target_fpr=0.05)
    assert detector.calibration_fpr <= 0.05
    from pkgsleuth.model import save_model

    save_model(model, tmp_path / "m.model")
    detector.save(tmp_path / "d.json", "m.model")
    restored = ThresholdedDetector.load(tmp_path / "d.json")
    assert restored.threshold == detector.threshold
    assert np.array_equal(restored.model.predict_score(X), model.predict_score(X))


def test_select_top_examples():
    items = [(f"a{i}", s) for i, s in enumerate([0.1, 0.9, 0.5, 0.8, 0.2, 0.95, 0.4, 0.3, 0.7, 0.6])]
    top = select_top_adversarial(items, 20.0)
    assert [t[0] for t in top] == ["a5", "a1"]  # two highest scores
    assert select_top_adversarial(items, 100.0) == sorted(items, key=lambda t: (-t[1]))
    tied = [("x", 0.5), ("y", 0.5), ("z", 0.5)]
    assert [t[0] for t in select_top_adversarial(tied, 34.0)][0] == "x"  # lower index wins


def test_select_top_threshold_property():
    rng = np.random.default_rng(3)
    items = [(i, float(s)) for i, s in enumerate(rng.random(50))]
    chosen = select_top_adversarial(items, 30.0)
    assert len(chosen) == math.ceil(0.3 * 50)
    floor = min(s for _, s in chosen)
    unchosen = [s for pair, s in items if (pair, s) not in chosen]
    assert all(s <= floor for s in unchosen)


def test_adversarial_train_empty_set_keeps_models():
    X, y = separable_store(seed=6)
    result = train(X, y, "decision_tree", grid={"max_depth": [3]}, seed=1, schema_hash="h")
    hardened = adversarial_train(result, X, y, lambda i, m: None, ATConfig(k_percent=20), "h")
    assert hardened == result.fold_models  # same objects: nothing to learn from


def test_at_config_validation():
    with pytest.raises(ValueError):
        ATConfig(k_percent=0)
    with pytest.raises(ValueError):
        ATConfig(k_percent=101)
