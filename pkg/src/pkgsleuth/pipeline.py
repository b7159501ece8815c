"""Run orchestration: ingest -> extract -> train -> attack -> adv-train -> tune -> scan -> report.

Every command reads one YAML run configuration (CLI/service overrides mirror
its keys) and drops a replay record (config snapshot, seeds, data-file
hashes) into the reports directory, so any number in any artifact can be
regenerated bit-exactly.

Detector deployment convention: the five per-fold models score a package as
their mean; decision thresholds are tuned per target FPR on out-of-fold
scores over the training store.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .attack import AttackConfig, optimize
from .corpus import CorpusSpec, generate
from .errors import ConfigError, DataError
from .features import FeatureExtractor, FeatureVector, append_store, read_store, write_store
from .ingest import (
    apply_labels,
    load_package,
    manifest_id,
    read_label_csv,
    read_manifest,
    resolve_manifest_path,
    write_manifest,
)
from .model import load_model, save_model
from .training import (
    ATConfig,
    DEFAULT_TARGET_FPRS,
    EvaluationReport,
    TrainResult,
    adversarial_train,
    train,
    tpr_at_fpr,
    tune_threshold,
)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    seed: int = 7
    corpus_dir: Path = Path("run/corpus")
    manifest: Path = Path("run/corpus/manifest.jsonl")
    feature_store: Path = Path("run/features.csv")
    models_dir: Path = Path("run/models")
    reports_dir: Path = Path("run/reports")
    labels_csv: Path | None = None
    catalog_file: Path | None = None
    patterns_file: Path | None = None
    extensions_file: Path | None = None
    tokens_file: Path | None = None
    model_kind: str = "gradient_boosted"
    grid: dict | None = None
    target_fprs: tuple = DEFAULT_TARGET_FPRS
    attack: dict = field(default_factory=dict)
    at_k_percent: float = 20.0
    corpus: dict = field(default_factory=dict)
    jobs: int = 1
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for key, value in (overrides or {}).items():
            node = raw
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        base = Path(os.environ.get("PKGSLEUTH_RUN_ROOT") or path.parent)
        paths = raw.get("paths", {})

        def p(key, default):
            value = paths.get(key)
            return (base / value).resolve() if value else (base / default).resolve()

        data_files = raw.get("data_files", {}) or {}

        def dp(key):
            value = data_files.get(key)
            return (base / value).resolve() if value else None

        model = raw.get("model", {}) or {}
        cfg = cls(
            seed=int(raw.get("seed", 7)),
            corpus_dir=p("corpus_dir", "run/corpus"),
            manifest=p("manifest", "run/corpus/manifest.jsonl"),
            feature_store=p("feature_store", "run/features.csv"),
            models_dir=p("models_dir", "run/models"),
            reports_dir=p("reports_dir", "run/reports"),
            labels_csv=(base / paths["labels_csv"]).resolve() if paths.get("labels_csv") else None,
            catalog_file=dp("catalog"),
            patterns_file=dp("patterns"),
            extensions_file=dp("extensions"),
            tokens_file=dp("tokens"),
            model_kind=model.get("kind", "gradient_boosted"),
            grid=model.get("grid"),
            target_fprs=tuple(raw.get("target_fprs", DEFAULT_TARGET_FPRS)),
            attack=raw.get("attack", {}) or {},
            at_k_percent=float((raw.get("at", {}) or {}).get("k_percent", 20.0)),
            corpus=raw.get("corpus", {}) or {},
            jobs=int(raw.get("jobs", 1)),
            raw=raw,
        )
        for f in (cfg.catalog_file, cfg.patterns_file, cfg.extensions_file, cfg.tokens_file):
            if f is not None and not f.exists():
                raise ConfigError(f"referenced data file {f} does not exist")
        return cfg

    def extractor(self) -> FeatureExtractor:
        from .features import load_extensions, load_suspicious_tokens
        from .behavior import load_catalog as _lc, load_patterns as _lp

        return FeatureExtractor(
            catalog=_lc(str(self.catalog_file)) if self.catalog_file else None,
            patterns=_lp(str(self.patterns_file)) if self.patterns_file else None,
            extensions=load_extensions(str(self.extensions_file)) if self.extensions_file else None,
            suspicious_tokens=load_suspicious_tokens(str(self.tokens_file)) if self.tokens_file else None,
        )

    def attack_config(self, seed_offset: int = 0) -> AttackConfig:
        a = dict(self.attack)
        pool = tuple(a.get("api_variant_pool", ("getattribute_ref", "dict_ref")))
        return AttackConfig(
            max_rounds=int(a.get("max_rounds", 10)),
            population_per_round=int(a.get("population_per_round", 4)),
            mr_budget_per_round=int(a.get("mr_budget_per_round", 8)),
            stop_threshold=a.get("stop_threshold"),
            seed=int(a.get("seed", self.seed)) + seed_offset,
            plateau_rounds=int(a.get("plateau_rounds", 2)),
            api_variant_pool=pool,
        )


def _record_run(config: RunConfig, command: str, summary: dict) -> None:
    config.reports_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "seed": config.seed,
        "config": config.raw,
        "summary": summary,
        "data_hashes": _data_hashes(config),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    out = config.reports_dir / f"run-{command}.json"
    out.write_text(json.dumps(record, indent=2, default=str) + "\n", encoding="utf-8")


def _data_hashes(config: RunConfig) -> dict:
    hashes = {}
    for name, path in (
        ("catalog", config.catalog_file),
        ("patterns", config.patterns_file),
        ("extensions", config.extensions_file),
        ("tokens", config.tokens_file),
    ):
        if path is not None:
            hashes[name] = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]
    return hashes


# --- ingest ---


def cmd_ingest(config: RunConfig) -> dict:
    """Build the dataset manifest: synthetic generation or a local package tree."""
    corpus = config.corpus
    if corpus.get("synthetic", True):
        spec = CorpusSpec(
            n_benign=int(corpus.get("n_benign", 200)),
            n_malicious=int(corpus.get("n_malicious", 200)),
            family_weights=corpus.get("family_weights"),
            obfuscated_fraction=float(corpus.get("obfuscated_fraction", 0.0)),
            seed=int(corpus.get("seed", config.seed)),
            days=int(corpus.get("days", 10)),
        )
        entries = generate(spec, config.corpus_dir)
        config.manifest.parent.mkdir(parents=True, exist_ok=True)
        write_manifest(entries, config.manifest)
        summary = {"packages": len(entries), "synthetic": True}
    else:
        root = config.corpus_dir
        if not root.exists():
            raise DataError(f"corpus directory {root} does not exist")
        artifacts = []
        entries = []
        for child in sorted(root.iterdir()):
            if child.name.startswith(".") or child.name == "manifest.jsonl":
                continue
            if not (child.is_dir() or child.suffix in (".zip", ".whl", ".gz", ".tgz", ".tar")):
                continue
            try:
                artifact = load_package(child)
            except Exception as exc:
                logger.warning("skipping %s: %s", child, exc)
                continue
            artifacts.append(artifact)
            try:
                stored = str(child.relative_to(config.manifest.parent))
            except ValueError:
                stored = str(child)
            entries.append({
                "name": artifact.name,
                "version": artifact.version,
                "path": stored,
                "label": None,
                "origin": "local",
                "published_at": None,
            })
        if config.labels_csv:
            records = read_label_csv(config.labels_csv)
            apply_labels(artifacts, records)
            for artifact, entry in zip(artifacts, entries):
                entry["label"] = artifact.label
        config.manifest.parent.mkdir(parents=True, exist_ok=True)
        write_manifest(entries, config.manifest)
        summary = {"packages": len(entries), "synthetic": False}
    _record_run(config, "ingest", summary)
    return summary


# --- extract ---


def _extract_one(args) -> tuple[str, list[float] | None, str | None, str]:
    path, label, extractor = args
    try:
        artifact = load_package(path)
        vec = extractor.extract(artifact)
        return vec.package_id, vec.values, label, ""
    except Exception as exc:  # per-package failures logged, run continues
        return str(path), None, label, str(exc)


def cmd_extract(config: RunConfig) -> dict:
    """Extract vectors for every manifest entry; resumable; >10% failures is an error."""
    if not config.manifest.exists():
        raise DataError(f"manifest {config.manifest} does not exist (run ingest first)")
    entries = read_manifest(config.manifest)
    extractor = config.extractor()
    store = config.feature_store
    done_ids: set[str] = set()
    if store.exists():
        digest, _, _, _, ids = read_store(store)
        if digest != extractor.schema_hash:
            raise DataError(f"store {store} has schema {digest}, extractor has {extractor.schema_hash}")
        done_ids = set(ids)
    todo = [e for e in entries if manifest_id(e) not in done_ids]
    failures = []
    vectors: list[FeatureVector] = []
    jobs = max(1, config.jobs)
    work = [(resolve_manifest_path(config.manifest, e), e.get("label"), extractor) for e in todo]
    if jobs == 1:
        results = map(_extract_one, work)
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_one, work, chunksize=8))
    for pkg_id, values, label, error in results:
        if values is None:
            failures.append({"path": pkg_id, "error": error})
            logger.warning("extraction failed for %s: %s", pkg_id, error)
            continue
        vectors.append(FeatureVector(pkg_id, values, extractor.schema_hash, label))
    store.parent.mkdir(parents=True, exist_ok=True)
    if not store.exists():
        write_store(store, vectors, extractor.schema, extractor.schema_hash)
    else:
        append_store(store, vectors, extractor.schema_hash)
    summary = {
        "extracted": len(vectors),
        "skipped": len(entries) - len(todo),
        "failed": len(failures),
        "failures": failures[:20],
        "schema_hash": extractor.schema_hash,
    }
    _record_run(config, "extract", summary)
    if todo and len(failures) > 0.10 * len(todo):
        raise DataError(f"{len(failures)}/{len(todo)} packages failed extraction")
    return summary


# --- train ---


def _load_xy(config: RunConfig):
    if not config.feature_store.exists():
        raise DataError(f"feature store {config.feature_store} does not exist (run extract first)")
    digest, names, X, labels, ids = read_store(config.feature_store)
    known = [(i, l) for i, l in enumerate(labels) if l in ("benign", "malicious")]
    if not known:
        raise DataError("feature store has no labeled rows")
    rows = [i for i, _ in known]
    y = np.array([1 if l == "malicious" else 0 for _, l in known])
    return digest, X[rows], y, [ids[i] for i in rows]


def cmd_train(config: RunConfig) -> dict:
    digest, X, y, ids = _load_xy(config)
    result = train(X, y, config.model_kind, grid=config.grid, seed=config.seed, schema_hash=digest)
    config.models_dir.mkdir(parents=True, exist_ok=True)
    for fold, model in enumerate(result.fold_models):
        save_model(model, config.models_dir / f"{config.model_kind}-fold{fold}.model")
    meta = {
        "kind": config.model_kind,
        "best_params": result.best_params,
        "cv_table": result.cv_table,
        "fold_assignment": result.fold_assignment.tolist(),
        "ids": ids,
        "seed": config.seed,
        "schema_hash": digest,
    }
    (config.models_dir / f"{config.model_kind}-cv.json").write_text(
        json.dumps(meta, indent=2) + "\n", encoding="utf-8"
    )
    summary = {
        "kind": config.model_kind,
        "best_params": result.best_params,
        "mean_val_tpr_at_1fpr": result.mean_val_tpr(),
    }
    _record_run(config, "train", summary)
    return summary


def _load_train_result(config: RunConfig, variant: str = "") -> tuple[TrainResult, dict]:
    meta_path = config.models_dir / f"{config.model_kind}-cv.json"
    if not meta_path.exists():
        raise DataError(f"no trained models under {config.models_dir} (run train first)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    models = []
    for fold in range(len(set(meta["fold_assignment"]))):
        name = f"{config.model_kind}{variant}-fold{fold}.model"
        path = config.models_dir / name
        if not path.exists():
            raise DataError(f"model file {path} missing")
        models.append(load_model(path))
    result = TrainResult(
        kind=meta["kind"],
        best_params=meta["best_params"],
        fold_models=models,
        fold_assignment=np.asarray(meta["fold_assignment"]),
        cv_table=meta["cv_table"],
        seed=meta["seed"],
    )
    return result, meta


# --- attack ---


def _attack_split(config: RunConfig, result: TrainResult, X, y, ids, artifacts_by_id,
                  extractor: FeatureExtractor, seed_base: int, against: str) -> dict:
    """Attack every malicious validation sample of each fold against its model."""
    records = []
    per_fold = []
    for fold, model in enumerate(result.fold_models):
        val_idx = np.nonzero(result.fold_assignment == fold)[0]
        mal_val = [int(i) for i in val_idx if y[i] == 1]
        ben_val = [int(i) for i in val_idx if y[i] == 0]
        threshold = tune_threshold(model.predict_score(X[val_idx]), y[val_idx], 0.01)

        def score_fn(artifact, model=model):
            return float(model.predict_score(np.asarray(extractor.extract(artifact).values))[0])

        adv_scores = []
        evaded = 0
        for i in mal_val:
            artifact = artifacts_by_id[ids[i]]
            res = optimize(artifact, score_fn, config.attack_config(seed_offset=seed_base + i))
            adv_scores.append(res.best_score)
            evaded += int(res.best_score < threshold)
            rec = res.to_record(ids[i])
            rec.update({"fold": fold, "threshold": float(threshold), "against": against})
            records.append((rec, res))
        ben_scores = model.predict_score(X[ben_val]) if ben_val else np.array([])
        mixed = np.concatenate([ben_scores, np.asarray(adv_scores)])
        mixed_y = np.concatenate([np.zeros(len(ben_scores)), np.ones(len(adv_scores))])
        clean_tpr = tpr_at_fpr(model.predict_score(X[val_idx]), y[val_idx], 0.01)
        adv_tpr = tpr_at_fpr(mixed, mixed_y, 0.01) if len(ben_scores) else 0.0
        per_fold.append({
            "fold": fold,
            "clean_tpr_at_1fpr": clean_tpr,
            "adv_tpr_at_1fpr": adv_tpr,
            "evasion_rate": evaded / len(mal_val) if mal_val else 0.0,
            "attacked": len(mal_val),
        })
    return {"per_fold": per_fold, "records": records}


def _artifacts_by_id(config: RunConfig) -> dict:
    entries = read_manifest(config.manifest)
    table = {}
    for entry in entries:
        table[manifest_id(entry)] = resolve_manifest_path(config.manifest, entry)
    return table


class _LazyArtifacts:
    def __init__(self, paths: dict):
        self.paths = paths
        self.cache: dict = {}

    def __getitem__(self, pkg_id):
        if pkg_id not in self.cache:
            self.cache[pkg_id] = load_package(self.paths[pkg_id])
        return self.cache[pkg_id]


def cmd_attack(config: RunConfig, variant: str = "") -> dict:
    """Attack the per-fold validation malicious samples; write per-sample records."""
    digest, X, y, ids = _load_xy(config)
    result, _ = _load_train_result(config, variant)
    extractor = config.extractor()
    if extractor.schema_hash != digest:
        raise DataError("feature store and extractor schema hashes differ")
    artifacts = _LazyArtifacts(_artifacts_by_id(config))
    outcome = _attack_split(config, result, X, y, ids, artifacts, extractor,
                            seed_base=0, against=f"{config.model_kind}{variant}")
    config.reports_dir.mkdir(parents=True, exist_ok=True)
    report_path = config.reports_dir / f"attack{variant or '-base'}.jsonl"
    with open(report_path, "w", encoding="utf-8") as fh:
        for rec, res in outcome["records"]:
            fh.write(json.dumps(rec) + "\n")
    plans_dir = config.reports_dir / f"plans{variant or '-base'}"
    plans_dir.mkdir(exist_ok=True)
    for rec, res in outcome["records"]:
        (plans_dir / f"{rec['package']}.plan.json").write_text(res.plan_trace.to_json() + "\n", encoding="utf-8")
    per_fold = outcome["per_fold"]
    summary = {
        "per_fold": per_fold,
        "mean_clean_tpr_at_1fpr": float(np.mean([f["clean_tpr_at_1fpr"] for f in per_fold])),
        "mean_adv_tpr_at_1fpr": float(np.mean([f["adv_tpr_at_1fpr"] for f in per_fold])),
        "mean_evasion_rate": float(np.mean([f["evasion_rate"] for f in per_fold])),
        "report": str(report_path),
    }
    _record_run(config, f"attack{variant}", summary)
    return summary


# --- adversarial training ---


def cmd_adv_train(config: RunConfig, k_percent: float | None = None) -> dict:
    digest, X, y, ids = _load_xy(config)
    result, meta = _load_train_result(config)
    extractor = config.extractor()
    artifacts = _LazyArtifacts(_artifacts_by_id(config))
    k = float(k_percent if k_percent is not None else config.at_k_percent)

    def attack_fn(i, model):
        def score_fn(artifact):
            return float(model.predict_score(np.asarray(extractor.extract(artifact).values))[0])

        res = optimize(artifacts[ids[i]], score_fn, config.attack_config(seed_offset=10_000 + i))
        return (np.asarray(extractor.extract(res.best_artifact).values), res.best_score)

    hardened = adversarial_train(result, X, y, attack_fn, ATConfig(k_percent=k), digest)
    tag = f"-at{int(k)}"
    for fold, model in enumerate(hardened):
        save_model(model, config.models_dir / f"{config.model_kind}{tag}-fold{fold}.model")
    summary = {"k_percent": k, "models": len(hardened), "variant": tag}
    _record_run(config, f"adv-train{tag}", summary)
    return summary


# --- tune ---


def cmd_tune(config: RunConfig, variant: str = "") -> dict:
    """Tune decision thresholds per target FPR on out-of-fold scores."""
    digest, X, y, ids = _load_xy(config)
    result, _ = _load_train_result(config, variant)
    oof = np.zeros(len(y))
    for fold, model in enumerate(result.fold_models):
        val_idx = np.nonzero(result.fold_assignment == fold)[0]
        oof[val_idx] = model.predict_score(X[val_idx])
    profiles = {}
    for target in config.target_fprs:
        t = tune_threshold(oof, y, target)
        benign = oof[y == 0]
        malicious = oof[y == 1]
        profiles[str(target)] = {
            "threshold": float(t).hex(),
            "achieved_fpr": float((benign >= t).mean()),
            "achieved_tpr": float((malicious >= t).mean()) if malicious.size else 0.0,
        }
    payload = {
        "kind": config.model_kind,
        "variant": variant,
        "schema_hash": digest,
        "profiles": profiles,
        "model_files": [f"{config.model_kind}{variant}-fold{f}.model" for f in range(len(result.fold_models))],
    }
    out = config.models_dir / f"{config.model_kind}{variant}-thresholds.json"
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    summary = {"profiles": {k: {"achieved_fpr": v["achieved_fpr"], "achieved_tpr": v["achieved_tpr"]}
                            for k, v in profiles.items()}, "file": str(out)}
    _record_run(config, f"tune{variant}", summary)
    return summary


# --- scan ---


class Scanner:
    """Mean-of-fold-models scorer with FPR-profile thresholds; reusable across scans."""

    def __init__(self, config: RunConfig, variant: str = ""):
        thr_path = config.models_dir / f"{config.model_kind}{variant}-thresholds.json"
        if not thr_path.exists():
            raise DataError(f"no tuned thresholds at {thr_path} (run tune first)")
        payload = json.loads(thr_path.read_text(encoding="utf-8"))
        self.models = [load_model(config.models_dir / name) for name in payload["model_files"]]
        self.profiles = {
            float(k): float.fromhex(v["threshold"]) for k, v in payload["profiles"].items()
        }
        self.extractor = config.extractor()
        if payload["schema_hash"] != self.extractor.schema_hash:
            raise DataError("threshold file schema hash does not match extractor")
        self.group_index: dict[str, list[int]] = {}
        for i, desc in enumerate(self.extractor.schema):
            self.group_index.setdefault(desc.group, []).append(i)
        self._importance = sum(m.feature_importance() for m in self.models)

    def score(self, artifact) -> float:
        vec = np.asarray(self.extractor.extract(artifact).values)
        return float(np.mean([m.predict_score(vec)[0] for m in self.models]))

    def top_groups(self, artifact, n: int = 3) -> list[str]:
        vec = np.asarray(self.extractor.extract(artifact).values)
        weights = {}
        for group, idx in self.group_index.items():
            cols = np.asarray(idx)
            weights[group] = float((self._importance[cols] * (vec[cols] > 0)).sum())
        ranked = sorted(weights, key=lambda g: -weights[g])
        return [g for g in ranked if weights[g] > 0][:n]

    def scan(self, path) -> dict:
        start = time.perf_counter()
        artifact = load_package(path)
        score = self.score(artifact)
        verdicts = []
        for target in sorted(self.profiles, reverse=True):
            verdicts.append({
                "target_fpr": target,
                "threshold": self.profiles[target],
                "verdict": "malicious" if score >= self.profiles[target] else "benign",
            })
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        strictest = min(self.profiles)
        return {
            "package": f"{artifact.name}-{artifact.version}",
            "score": score,
            "verdicts": verdicts,
            "top_groups": self.top_groups(artifact),
            "elapsed_ms": elapsed_ms,
            "malicious_at_strictest": score >= self.profiles[strictest],
        }


def cmd_scan(config: RunConfig, paths: list, variant: str = "") -> dict:
    scanner = Scanner(config, variant)
    results = [scanner.scan(p) for p in paths]
    mean_ms = float(np.mean([r["elapsed_ms"] for r in results])) if results else 0.0
    summary = {
        "scanned": len(results),
        "mean_elapsed_ms": mean_ms,
        "malicious": sum(1 for r in results if r["malicious_at_strictest"]),
        "results": results,
    }
    return summary


# --- report ---


def cmd_report(config: RunConfig, variant: str = "") -> dict:
    """The multi-FPR table, ROC CSV, and FP/day budget from manifest timestamps."""
    digest, X, y, ids = _load_xy(config)
    result, _ = _load_train_result(config, variant)
    oof = np.zeros(len(y))
    for fold, model in enumerate(result.fold_models):
        val_idx = np.nonzero(result.fold_assignment == fold)[0]
        oof[val_idx] = model.predict_score(X[val_idx])

    rows = []
    for target in sorted(config.target_fprs, reverse=True):
        t = tune_threshold(oof, y, target)
        report = EvaluationReport.from_scores(oof, y, t, config.target_fprs)
        rows.append({"max_fpr": target, "threshold": float(t), **report.to_dict()})

    config.reports_dir.mkdir(parents=True, exist_ok=True)
    roc = EvaluationReport.from_scores(oof, y, 0.5, config.target_fprs).roc
    roc_path = config.reports_dir / f"roc{variant or ''}.csv"
    with open(roc_path, "w", encoding="utf-8") as fh:
        fh.write("fpr,tpr,threshold\n")
        for fpr, tpr, t in roc:
            fh.write(f"{fpr},{tpr},{t}\n")

    fp_per_day = None
    entries = read_manifest(config.manifest) if config.manifest.exists() else []
    stamps = sorted({e.get("published_at") for e in entries if e.get("published_at")})
    if stamps:
        days = len({s[:10] for s in stamps})
        strictest = sorted(rows, key=lambda r: r["max_fpr"])[0]
        fp_per_day = strictest["fp"] / days if days else None

    table_lines = [f"{'Max FPR':>8} {'FP':>6} {'TP':>6} {'FN':>6} {'TN':>7} {'Acc':>7} {'Prec':>7} {'Rec':>7} {'F1':>7}"]
    for row in rows:
        table_lines.append(
            f"{row['max_fpr']*100:>7.2f}% {row['fp']:>6} {row['tp']:>6} {row['fn']:>6} {row['tn']:>7} "
            f"{row['accuracy']*100:>6.2f}% {row['precision']*100:>6.2f}% {row['recall']*100:>6.2f}% {row['f1']*100:>6.2f}%"
        )
    table = "\n".join(table_lines)
    (config.reports_dir / f"report{variant or ''}.txt").write_text(table + "\n", encoding="utf-8")
    (config.reports_dir / f"report{variant or ''}.json").write_text(
        json.dumps({"rows": rows, "fp_per_day": fp_per_day}, indent=2) + "\n", encoding="utf-8"
    )
    summary = {"rows": rows, "fp_per_day": fp_per_day, "table": table,
               "roc_csv": str(roc_path)}
    _record_run(config, f"report{variant}", summary)
    return summary
