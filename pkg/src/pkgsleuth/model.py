"""Tree-ensemble detectors built from scratch on numpy.

Three kinds share one array-based tree representation (split feature,
threshold, children, leaf value):

- decision_tree: single gini-split classifier; score = leaf malicious fraction
- random_forest: bootstrapped gini trees with per-split feature subsampling;
  score = mean of tree leaf fractions
- gradient_boosted: logistic loss, exact greedy splits on gradient/hessian
  sums with L2 regularization, per-leaf Newton steps; score = logistic of
  the summed leaf margins

Model files are line-oriented text with floats in ``float.hex`` form, so a
save/load round-trip reproduces scores exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaMismatch

MODEL_KINDS = ("decision_tree", "random_forest", "gradient_boosted")

_LEAF = -1
_MIN_GAIN = 1e-12


@dataclass
class Tree:
    """Parallel-array binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray  # int
    threshold: np.ndarray  # float
    left: np.ndarray  # int
    right: np.ndarray  # int
    value: np.ndarray  # float leaf payload (class fraction or margin)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat != _LEAF
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return self.value[node]

    def n_nodes(self) -> int:
        return len(self.feature)


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self, feature: int, threshold: float, value: float) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.value.append(value)
        return len(self.feature) - 1

    def build(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=float),
        )


def _best_split_gini(X: np.ndarray, y: np.ndarray, columns: np.ndarray):
    """(feature, threshold, weighted impurity decrease) or None."""
    n = X.shape[0]
    Xc = X[:, columns]
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    ys = y[order]
    pos_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    pos_right = ys.sum(axis=0)[None, :] - pos_left
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    with np.errstate(invalid="ignore", divide="ignore"):
        pl = pos_left / n_left
        pr = pos_right / n_right
        gini = n_left * 2 * pl * (1 - pl) + n_right * 2 * pr * (1 - pr)
    total_pos = float(y.sum())
    p = total_pos / n
    parent = n * 2 * p * (1 - p)
    gain = np.where(valid, parent - gini, -np.inf)
    flat = int(np.argmax(gain))
    i, j = divmod(flat, gain.shape[1])
    if gain[i, j] <= _MIN_GAIN:
        return None
    threshold = float((xs[i, j] + xs[i + 1, j]) / 2.0)
    return int(columns[j]), threshold, float(gain[i, j])


def _active_columns(X: np.ndarray) -> np.ndarray:
    """Columns that vary on this training set; constant columns cannot split."""
    return np.nonzero(X.min(axis=0) < X.max(axis=0))[0]


def _grow_gini(X, y, max_depth, rng: np.random.Generator | None, max_features: int | None,
               active: np.ndarray):
    builder = _TreeBuilder()

    def grow(rows: np.ndarray, depth: int) -> int:
        ysub = y[rows]
        frac = float(ysub.mean()) if len(rows) else 0.0
        node = builder.add(_LEAF, 0.0, frac)
        if depth >= max_depth or len(rows) < 2 or frac in (0.0, 1.0):
            return node
        columns = active
        if max_features is not None and max_features < len(active):
            columns = np.sort(rng.choice(active, size=max_features, replace=False))
        split = _best_split_gini(X[rows], ysub, columns)
        if split is None:
            return node
        feat, threshold, _ = split
        go_left = X[rows, feat] <= threshold
        builder.feature[node] = feat
        builder.threshold[node] = threshold
        builder.left[node] = grow(rows[go_left], depth + 1)
        builder.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return builder.build()


def _best_split_grad(X, g, h, lam: float, columns: np.ndarray):
    n = X.shape[0]
    Xc = X[:, columns]
    order = np.argsort(Xc, axis=0, kind="stable")
    xs = np.take_along_axis(Xc, order, axis=0)
    gs = g[order]
    hs = h[order]
    GL = np.cumsum(gs, axis=0)[:-1]
    HL = np.cumsum(hs, axis=0)[:-1]
    G = float(g.sum())
    H = float(h.sum())
    GR = G - GL
    HR = H - HL
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    gain = 0.5 * (GL**2 / (HL + lam) + GR**2 / (HR + lam) - G**2 / (H + lam))
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))
    i, j = divmod(flat, gain.shape[1])
    if gain[i, j] <= _MIN_GAIN:
        return None
    threshold = float((xs[i, j] + xs[i + 1, j]) / 2.0)
    return int(columns[j]), threshold, float(gain[i, j])


def _grow_grad(X, g, h, max_depth: int, lam: float, active: np.ndarray):
    builder = _TreeBuilder()

    def leaf_value(rows) -> float:
        return float(-g[rows].sum() / (h[rows].sum() + lam))

    def grow(rows: np.ndarray, depth: int) -> int:
        node = builder.add(_LEAF, 0.0, leaf_value(rows))
        if depth >= max_depth or len(rows) < 2:
            return node
        split = _best_split_grad(X[rows], g[rows], h[rows], lam, active)
        if split is None:
            return node
        feat, threshold, _ = split
        go_left = X[rows, feat] <= threshold
        builder.feature[node] = feat
        builder.threshold[node] = threshold
        builder.left[node] = grow(rows[go_left], depth + 1)
        builder.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return builder.build()


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class TreeEnsembleModel:
    kind: str
    trees: list[Tree]
    hyperparameters: dict
    schema_hash: str
    training_seed: int
    base_margin: float = 0.0  # gradient_boosted prior log-odds
    _merged: tuple | None = field(default=None, repr=False, compare=False)

    def _merged_arrays(self):
        # concatenate all trees into one node table for level-synchronous predict
        if self._merged is None:
            roots, feats, thrs, lefts, rights, vals = [], [], [], [], [], []
            offset = 0
            for tree in self.trees:
                roots.append(offset)
                feats.append(tree.feature)
                thrs.append(tree.threshold)
                lefts.append(np.where(tree.left >= 0, tree.left + offset, tree.left))
                rights.append(np.where(tree.right >= 0, tree.right + offset, tree.right))
                vals.append(tree.value)
                offset += tree.n_nodes()
            self._merged = (
                np.asarray(roots, dtype=np.int64),
                np.concatenate(feats),
                np.concatenate(thrs),
                np.concatenate(lefts),
                np.concatenate(rights),
                np.concatenate(vals),
            )
        return self._merged

    def _leaf_values(self, X: np.ndarray) -> np.ndarray:
        """(n_rows, n_trees) leaf payloads."""
        roots, feature, threshold, left, right, value = self._merged_arrays()
        n = X.shape[0]
        node = np.broadcast_to(roots, (n, len(roots))).copy()
        row_index = np.broadcast_to(np.arange(n)[:, None], node.shape)
        while True:
            feat = feature[node]
            internal = feat != _LEAF
            if not internal.any():
                break
            rows = row_index[internal]
            cur = node[internal]
            go_left = X[rows, feat[internal]] <= threshold[cur]
            node[internal] = np.where(go_left, left[cur], right[cur])
        return value[node]

    def predict_score(self, X: np.ndarray) -> np.ndarray:
        """Calibrated malicious score in [0, 1] per row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 384:
            raise SchemaMismatch(f"expected 384 features, got {X.shape[1]}")
        leaves = self._leaf_values(X)
        if self.kind in ("decision_tree", "random_forest"):
            return leaves.mean(axis=1)
        lr = float(self.hyperparameters.get("learning_rate", 0.1))
        # accumulate tree by tree so an independent sequential re-walk of the
        # ensemble reproduces the margin bit-exactly
        margins = np.full(X.shape[0], self.base_margin)
        for j in range(leaves.shape[1]):
            margins += lr * leaves[:, j]
        return _sigmoid(margins)

    def feature_importance(self) -> np.ndarray:
        """Split counts per feature index (coarse attribution for reports)."""
        imp = np.zeros(384)
        for tree in self.trees:
            internal = tree.feature[tree.feature != _LEAF]
            np.add.at(imp, internal, 1.0)
        return imp


def train_model(kind: str, X: np.ndarray, y: np.ndarray, params: dict,
                schema_hash: str, seed: int) -> TreeEnsembleModel:
    """Fit one ensemble of the given kind; deterministic under (params, seed)."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    max_depth = int(params.get("max_depth", 8))
    active = _active_columns(X)
    if active.size == 0:
        active = np.asarray([0], dtype=np.int64)

    if kind == "decision_tree":
        tree = _grow_gini(X, y, max_depth, None, None, active)
        return TreeEnsembleModel(kind, [tree], dict(params), schema_hash, seed)

    if kind == "random_forest":
        n_trees = int(params.get("n_trees", 100))
        max_features = int(params.get("max_features", max(1, int(math.sqrt(X.shape[1])))))
        rng = np.random.default_rng(seed)
        trees = []
        for _ in range(n_trees):
            rows = rng.integers(0, X.shape[0], size=X.shape[0])
            trees.append(_grow_gini(X[rows], y[rows], max_depth, rng, max_features, active))
        return TreeEnsembleModel(kind, trees, dict(params), schema_hash, seed)

    n_trees = int(params.get("n_trees", 100))
    lr = float(params.get("learning_rate", 0.1))
    lam = float(params.get("reg_lambda", 1.0))
    pos = float(y.mean())
    pos = min(max(pos, 1e-6), 1 - 1e-6)
    base = math.log(pos / (1 - pos))
    margins = np.full(X.shape[0], base)
    trees = []
    for _ in range(n_trees):
        p = _sigmoid(margins)
        g = p - y
        h = p * (1 - p)
        tree = _grow_grad(X, g, h, max_depth, lam, active)
        trees.append(tree)
        margins += lr * tree.predict(X)
    params = dict(params)
    params["learning_rate"] = lr
    return TreeEnsembleModel(kind, trees, params, schema_hash, seed, base_margin=base)


# --- portable text serialization (bit-exact round-trips) ---


def save_model(model: TreeEnsembleModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pkgsleuth-model v1\n")
        fh.write(f"kind {model.kind}\n")
        fh.write(f"schema {model.schema_hash}\n")
        fh.write(f"seed {model.training_seed}\n")
        fh.write(f"base_margin {float(model.base_margin).hex()}\n")
        hyper = " ".join(f"{k}={model.hyperparameters[k]}" for k in sorted(model.hyperparameters))
        fh.write(f"hyper {hyper}\n")
        fh.write(f"ntrees {len(model.trees)}\n")
        for t_index, tree in enumerate(model.trees):
            fh.write(f"tree {t_index} {tree.n_nodes()}\n")
            for i in range(tree.n_nodes()):
                if tree.feature[i] == _LEAF:
                    fh.write(f"leaf {float(tree.value[i]).hex()}\n")
                else:
                    fh.write(
                        f"node {int(tree.feature[i])} {float(tree.threshold[i]).hex()} "
                        f"{int(tree.left[i])} {int(tree.right[i])} {float(tree.value[i]).hex()}\n"
                    )
        fh.write("end\n")


def _parse_hyper(raw: str) -> dict:
    hyper = {}
    for piece in raw.split():
        key, _, value = piece.partition("=")
        try:
            hyper[key] = int(value)
        except ValueError:
            try:
                hyper[key] = float(value)
            except ValueError:
                hyper[key] = value
    return hyper


def load_model(path) -> TreeEnsembleModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "pkgsleuth-model v1":
        raise SchemaMismatch(f"{path}: not a model file")
    header = {}
    idx = 1
    while not lines[idx].startswith("ntrees "):
        key, _, value = lines[idx].partition(" ")
        header[key] = value
        idx += 1
    n_trees = int(lines[idx].split()[1])
    idx += 1
    trees = []
    for _ in range(n_trees):
        _, _, n_nodes = lines[idx].split()
        idx += 1
        builder = _TreeBuilder()
        for _ in range(int(n_nodes)):
            parts = lines[idx].split()
            idx += 1
            if parts[0] == "leaf":
                builder.add(_LEAF, 0.0, float.fromhex(parts[1]))
            else:
                node = builder.add(int(parts[1]), float.fromhex(parts[2]), float.fromhex(parts[5]))
                builder.left[node] = int(parts[3])
                builder.right[node] = int(parts[4])
        trees.append(builder.build())
    return TreeEnsembleModel(
        kind=header["kind"],
        trees=trees,
        hyperparameters=_parse_hyper(header.get("hyper", "")),
        schema_hash=header["schema"],
        training_seed=int(header.get("seed", 0)),
        base_margin=float.fromhex(header.get("base_margin", "0x0.0p+0")),
    )
