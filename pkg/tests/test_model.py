import math

import numpy as np
import pytest

from pkgsleuth.errors import SchemaMismatch
from pkgsleuth.model import (
    Tree,
    TreeEnsembleModel,
    _LEAF,
    load_model,
    save_model,
    train_model,
)


def padded(rows, base=0.0):
    X = np.full((len(rows), 384), base, dtype=float)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            X[i, j] = v
    return X


def hand_tree(feature, threshold, left_value, right_value):
    return Tree(
        feature=np.array([feature, _LEAF, _LEAF]),
        threshold=np.array([threshold, 0.0, 0.0]),
        left=np.array([1, _LEAF, _LEAF]),
        right=np.array([2, _LEAF, _LEAF]),
        value=np.array([0.0, left_value, right_value]),
    )


def test_hand_built_tree_walk():
    model = TreeEnsembleModel("decision_tree", [hand_tree(5, 0.5, 0.1, 0.9)], {}, "h", 0)
    low = padded([[0] * 6])
    high = padded([[0, 0, 0, 0, 0, 3.0]])
    assert model.predict_score(low)[0] == 0.1
    assert model.predict_score(high)[0] == 0.9


def test_all_vote_forest_scores_one():
    trees = [hand_tree(0, -1.0, 0.0, 1.0) for _ in range(7)]  # everything goes right
    model = TreeEnsembleModel("random_forest", trees, {}, "h", 0)
    assert model.predict_score(padded([[0.5]]))[0] == 1.0


def test_zero_margin_boosted_is_half():
    trees = [hand_tree(0, 0.5, 0.0, 0.0)]
    model = TreeEnsembleModel("gradient_boosted", trees, {"learning_rate": 0.3}, "h", 0, base_margin=0.0)
    assert model.predict_score(padded([[0.0]]))[0] == 0.5


def test_wrong_width_rejected():
    model = TreeEnsembleModel("decision_tree", [hand_tree(0, 0.5, 0, 1)], {}, "h", 0)
    with pytest.raises(SchemaMismatch):
        model.predict_score(np.zeros((1, 10)))


def separable_data(n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = np.zeros((n, 384))
    y = np.arange(n) % 2
    X[:, 3] = y * 2.0 + rng.random(n) * 0.5
    X[:, 90] = rng.random(n)
    return X, y.astype(int)


@pytest.mark.parametrize("kind", ["decision_tree", "random_forest", "gradient_boosted"])
def test_training_separates(kind):
    X, y = separable_data()
    model = train_model(kind, X, y, {"max_depth": 4, "n_trees": 20, "learning_rate": 0.3}, "h", 7)
    scores = model.predict_score(X)
    assert ((scores >= 0.5).astype(int) == y).mean() >= 0.95


@pytest.mark.parametrize("kind", ["decision_tree", "random_forest", "gradient_boosted"])
def test_training_deterministic(kind):
    X, y = separable_data(seed=3)
    params = {"max_depth": 6, "n_trees": 10, "learning_rate": 0.1}
    a = train_model(kind, X, y, params, "h", 42)
    b = train_model(kind, X, y, params, "h", 42)
    assert len(a.trees) == len(b.trees)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature)
        assert np.array_equal(ta.threshold, tb.threshold)
        assert np.array_equal(ta.value, tb.value)


def test_scores_in_unit_interval_fuzz():
    X, y = separable_data(seed=5)
    rng = np.random.default_rng(11)
    for kind in ("decision_tree", "random_forest", "gradient_boosted"):
        model = train_model(kind, X, y, {"max_depth": 8, "n_trees": 15, "learning_rate": 0.3}, "h", 2)
        probe = rng.random((200, 384)) * 100 - 50
        scores = model.predict_score(probe)
        assert np.all(scores >= 0.0) and np.all(scores <= 1.0)


def test_boosted_score_is_logistic_of_tree_sum():
    X, y = separable_data(seed=9)
    model = train_model("gradient_boosted", X, y, {"max_depth": 3, "n_trees": 12, "learning_rate": 0.2}, "h", 0)
    probe = X[:10]
    # independent re-walk of every tree, one sample at a time
    manual = []
    for row in probe:
        margin = model.base_margin
        for tree in model.trees:
            node = 0
            while tree.feature[node] != _LEAF:
                node = tree.left[node] if row[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
            margin += 0.2 * tree.value[node]
        manual.append(1.0 / (1.0 + math.exp(-margin)))
    assert np.allclose(model.predict_score(probe), manual, atol=0, rtol=0)


def test_scaling_features_and_thresholds_preserves_splits(tmp_path):
    """Scaling X and thresholds by the same factor keeps every split decision."""
    X, y = separable_data(seed=13)
    model = train_model("decision_tree", X, y, {"max_depth": 5}, "h", 0)
    scaled = load_model(save_and_reload_path(tmp_path, model))
    factor = 3.0
    for tree in scaled.trees:
        internal = tree.feature != _LEAF
        tree.threshold[internal] = tree.threshold[internal] * factor
    assert np.array_equal(
        model.predict_score(X), scaled.predict_score(X * factor)
    )


def save_and_reload_path(tmp_path, model):
    path = tmp_path / "m.model"
    save_model(model, path)
    return path


@pytest.mark.parametrize("kind", ["decision_tree", "random_forest", "gradient_boosted"])
def test_serialization_roundtrip_exact(tmp_path, kind):
    X, y = separable_data(seed=21)
    model = train_model(kind, X, y, {"max_depth": 5, "n_trees": 9, "learning_rate": 0.1}, "hash16", 13)
    path = tmp_path / f"{kind}.model"
    save_model(model, path)
    restored = load_model(path)
    assert restored.kind == model.kind
    assert restored.schema_hash == "hash16"
    assert restored.training_seed == 13
    probe = np.random.default_rng(1).random((100, 384)) * 10
    assert np.array_equal(model.predict_score(probe), restored.predict_score(probe))


def test_feature_importance_counts_splits():
    X, y = separable_data(seed=2)
    model = train_model("decision_tree", X, y, {"max_depth": 4}, "h", 0)
    importance = model.feature_importance()
    assert importance[3] >= 1  # the separating feature
    assert importance.sum() >= 1
