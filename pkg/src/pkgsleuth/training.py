"""Cross-validated training, FPR-targeted thresholds, evaluation, and AT.

The grid search runs a stratified 5-fold CV and picks the grid point with the
best mean validation TPR at 1% FPR; the five per-fold models trained at that
point are the detectors everything downstream reports on, and reported
metrics are means over the five.

Adversarial training attacks each malicious training sample against its own
fold's model, keeps the top-k% adversarial packages by output score, appends
them to that fold's training set, and retrains at the same grid point.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NoBenignSamples, SchemaMismatch, SingleClassData
from .model import MODEL_KINDS, TreeEnsembleModel, load_model, train_model

DEFAULT_GRIDS = {
    "decision_tree": {"max_depth": [4, 8, 16]},
    "random_forest": {"max_depth": [4, 8, 16], "n_trees": [100, 300]},
    "gradient_boosted": {"max_depth": [4, 8, 16], "n_trees": [100, 300], "learning_rate": [0.1, 0.3]},
}

DEFAULT_TARGET_FPRS = (0.30, 0.10, 0.01, 0.001, 0.0005)

_SENTINEL = math.nextafter(1.0, 2.0)  # above every calibrated score


def tune_threshold(scores, labels, target_fpr: float) -> float:
    """Smallest observed score t with FPR(t) <= target; ties favor TPR.

    The decision rule is malicious iff score >= t. When even the largest
    observed score keeps benign samples above it, a sentinel just over 1.0
    is returned (zero detections, zero false positives).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    benign = scores[labels == 0]
    if benign.size == 0:
        raise NoBenignSamples("threshold tuning requires benign samples")
    for t in np.unique(scores):
        if (benign >= t).mean() <= target_fpr:
            return float(t)
    return _SENTINEL


def tpr_at_fpr(scores, labels, target_fpr: float) -> float:
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    malicious = scores[labels == 1]
    if malicious.size == 0:
        return 0.0
    t = tune_threshold(scores, labels, target_fpr)
    return float((malicious >= t).mean())


@dataclass
class ThresholdedDetector:
    model: TreeEnsembleModel
    threshold: float
    target_fpr: float
    calibration_fpr: float
    calibration_tpr: float

    @classmethod
    def tune(cls, model: TreeEnsembleModel, X, labels, target_fpr: float) -> "ThresholdedDetector":
        scores = model.predict_score(X)
        labels = np.asarray(labels, dtype=int)
        t = tune_threshold(scores, labels, target_fpr)
        benign = scores[labels == 0]
        malicious = scores[labels == 1]
        achieved_fpr = float((benign >= t).mean()) if benign.size else 0.0
        achieved_tpr = float((malicious >= t).mean()) if malicious.size else 0.0
        return cls(model, t, target_fpr, achieved_fpr, achieved_tpr)

    def decide(self, X) -> np.ndarray:
        return self.model.predict_score(X) >= self.threshold

    def save(self, path, model_filename: str) -> None:
        payload = {
            "model_file": model_filename,
            "threshold": float(self.threshold).hex(),
            "target_fpr": self.target_fpr,
            "calibration_fpr": self.calibration_fpr,
            "calibration_tpr": self.calibration_tpr,
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ThresholdedDetector":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        model = load_model(Path(path).parent / payload["model_file"])
        return cls(
            model,
            float.fromhex(payload["threshold"]),
            payload["target_fpr"],
            payload["calibration_fpr"],
            payload["calibration_tpr"],
        )


@dataclass
class EvaluationReport:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc: list[tuple[float, float, float]]  # (fpr, tpr, threshold)
    tpr_at: dict[float, float]

    @classmethod
    def from_scores(cls, scores, labels, threshold: float,
                    target_fprs=DEFAULT_TARGET_FPRS) -> "EvaluationReport":
        scores = np.asarray(scores, dtype=float)
        labels = np.asarray(labels, dtype=int)
        pred = scores >= threshold
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        fn = int(np.sum(~pred & (labels == 1)))
        tn = int(np.sum(~pred & (labels == 0)))
        total = tp + fp + fn + tn
        accuracy = (tp + tn) / total if total else 0.0
        precision = tp / (tp + fp) if (tp + fp) else 0.0  # zero predicted positives -> 0
        recall = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        roc = []
        benign = labels == 0
        malicious = labels == 1
        for t in sorted(np.unique(scores), reverse=True):
            roc.append((float((scores[benign] >= t).mean()) if benign.any() else 0.0,
                        float((scores[malicious] >= t).mean()) if malicious.any() else 0.0,
                        float(t)))
        tpr_at = {}
        if benign.any():
            for target in target_fprs:
                tpr_at[target] = tpr_at_fpr(scores, labels, target)
        return cls(tp, fp, fn, tn, accuracy, precision, recall, f1, roc, tpr_at)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "tpr_at": {str(k): v for k, v in self.tpr_at.items()},
        }


def evaluate(detector: ThresholdedDetector, X, labels,
             target_fprs=DEFAULT_TARGET_FPRS) -> EvaluationReport:
    scores = detector.model.predict_score(X)
    return EvaluationReport.from_scores(scores, labels, detector.threshold, target_fprs)


# --- stratified cross-validation with grid search ---


def stratified_folds(labels, n_folds: int, seed: int) -> np.ndarray:
    """Deterministic fold assignment, class-balanced round robin."""
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    assignment = np.zeros(len(labels), dtype=int)
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        assignment[idx] = np.arange(len(idx)) % n_folds
    return assignment


def _grid_points(grid: dict) -> list[dict]:
    keys = sorted(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class TrainResult:
    kind: str
    best_params: dict
    fold_models: list[TreeEnsembleModel]
    fold_assignment: np.ndarray
    cv_table: list[dict] = field(default_factory=list)  # params + per-fold and mean val TPR@1%FPR
    seed: int = 0

    def mean_val_tpr(self) -> float:
        for row in self.cv_table:
            if row["params"] == self.best_params:
                return row["mean_tpr_at_1fpr"]
        return 0.0


def train(X, labels, kind: str, grid: dict | None = None, n_folds: int = 5,
          seed: int = 0, schema_hash: str = "", select_fpr: float = 0.01) -> TrainResult:
    """Grid search over a stratified K-fold CV; one model per fold at the best point."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=int)
    if len(np.unique(y)) < 2:
        raise SingleClassData("training requires both benign and malicious samples")
    if X.shape[1] != 384:
        raise SchemaMismatch(f"expected 384 features, got {X.shape[1]}")
    grid = grid or DEFAULT_GRIDS[kind]
    assignment = stratified_folds(y, n_folds, seed)
    cv_table = []
    model_cache: dict[int, list[TreeEnsembleModel]] = {}
    best_index = None
    best_mean = -1.0
    points = _grid_points(grid)
    for p_index, params in enumerate(points):
        fold_models = []
        fold_tprs = []
        for fold in range(n_folds):
            train_mask = assignment != fold
            model = train_model(kind, X[train_mask], y[train_mask], params, schema_hash,
                                seed * 1000 + fold)
            fold_models.append(model)
            val_mask = ~train_mask
            scores = model.predict_score(X[val_mask])
            fold_tprs.append(tpr_at_fpr(scores, y[val_mask], select_fpr))
        mean_tpr = float(np.mean(fold_tprs))
        cv_table.append({"params": params, "fold_tpr_at_1fpr": fold_tprs, "mean_tpr_at_1fpr": mean_tpr})
        model_cache[p_index] = fold_models
        if mean_tpr > best_mean:
            best_mean = mean_tpr
            best_index = p_index
    return TrainResult(
        kind=kind,
        best_params=points[best_index],
        fold_models=model_cache[best_index],
        fold_assignment=assignment,
        cv_table=cv_table,
        seed=seed,
    )


# --- adversarial training ---


@dataclass
class ATConfig:
    k_percent: float = 20.0
    selection: str = "highest_score"

    def __post_init__(self):
        if not 0 < self.k_percent <= 100:
            raise ValueError("k_percent must lie in (0, 100]")


def select_top_adversarial(adv: list[tuple], k_percent: float) -> list[tuple]:
    """ceil(k% of n) items with the highest scores; index breaks ties (stable)."""
    if not adv:
        return []
    m = math.ceil(k_percent / 100.0 * len(adv))
    ranked = sorted(range(len(adv)), key=lambda i: (-adv[i][1], i))
    return [adv[i] for i in ranked[:m]]


def adversarial_train(result: TrainResult, X, labels, attack_fn, at_config: ATConfig,
                      schema_hash: str = "") -> list[TreeEnsembleModel]:
    """Harden each fold's model on its own top-k% adversarial training samples.

    ``attack_fn(sample_index, model)`` must attack the package behind the
    given training row against that fold's model and return (adversarial
    feature values, adversarial score), or None when not applicable.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(labels, dtype=int)
    hardened = []
    for fold, model in enumerate(result.fold_models):
        train_idx = np.nonzero(result.fold_assignment != fold)[0]
        malicious_idx = [int(i) for i in train_idx if y[i] == 1]
        adv = []
        for i in malicious_idx:
            outcome = attack_fn(i, model)
            if outcome is None:
                continue
            adv.append(outcome)
        if not adv:
            hardened.append(model)
            continue
        selected = select_top_adversarial(adv, at_config.k_percent)
        adv_X = np.asarray([vec for vec, _ in selected], dtype=float)
        X_aug = np.vstack([X[train_idx], adv_X])
        y_aug = np.concatenate([y[train_idx], np.ones(len(adv_X), dtype=int)])
        hardened.append(
            train_model(result.kind, X_aug, y_aug, result.best_params, schema_hash,
                        result.seed * 1000 + fold)
        )
    return hardened
