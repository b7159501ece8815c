import hashlib
from pathlib import Path

import pytest

from pkgsleuth.behavior import encode_sequence, match_behaviors
from pkgsleuth.corpus import CorpusSpec, FAMILIES, generate
from pkgsleuth.ingest import load_package
from pkgsleuth.srcmodel import parse_unit, resolve_api_calls
from pkgsleuth.transform import detect_iocs


def tree_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(path.relative_to(root).as_posix().encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def behaviors_fired(artifact, catalog, patterns) -> int:
    total = 0
    for unit in artifact.units:
        tree = parse_unit(unit)
        cats = [catalog.category_of(u.module, u.api) for u in resolve_api_calls(tree, catalog)]
        total += sum(match_behaviors(encode_sequence(cats), patterns).values())
    return total


def test_generation_deterministic(tmp_path):
    spec = CorpusSpec(12, 12, obfuscated_fraction=0.3, seed=7)
    a = tmp_path / "a"
    b = tmp_path / "b"
    entries_a = generate(spec, a)
    entries_b = generate(spec, b)
    assert [e["name"] for e in entries_a] == [e["name"] for e in entries_b]
    assert tree_digest(a) == tree_digest(b)


def test_counts_and_labels(tmp_path):
    entries = generate(CorpusSpec(5, 9, seed=3), tmp_path)
    labels = [e["label"] for e in entries]
    assert labels.count("benign") == 5
    assert labels.count("malicious") == 9
    manifest = tmp_path / "manifest.jsonl"
    assert manifest.exists()


def test_separability_floor(tmp_path, catalog, patterns):
    entries = generate(CorpusSpec(15, 15, seed=5), tmp_path)
    for entry in entries:
        artifact = load_package(tmp_path / entry["path"])
        fired = behaviors_fired(artifact, catalog, patterns)
        if entry["label"] == "malicious":
            assert fired >= 1, f"{entry['name']} fired no behavior"
        else:
            assert fired == 0, f"benign {entry['name']} fired a behavior"


def test_stealer_mix_fires_information_stealing(tmp_path, catalog, patterns):
    entries = generate(
        CorpusSpec(0, 8, family_weights={"stealer": 1.0, "dropper": 0.0, "trojan": 0.0, "poc": 0.0}, seed=2),
        tmp_path,
    )
    for entry in entries:
        artifact = load_package(tmp_path / entry["path"])
        hits = 0
        for unit in artifact.units:
            tree = parse_unit(unit)
            cats = [catalog.category_of(u.module, u.api) for u in resolve_api_calls(tree, catalog)]
            hits += match_behaviors(encode_sequence(cats), patterns)["InformationStealing"]
        assert hits >= 1


def test_fully_obfuscated_has_no_plaintext_iocs(tmp_path):
    entries = generate(CorpusSpec(0, 10, obfuscated_fraction=1.0, seed=9), tmp_path)
    for entry in entries:
        artifact = load_package(tmp_path / entry["path"])
        for unit in artifact.units:
            tree = parse_unit(unit)
            assert tree.parse_ok
            assert detect_iocs(tree) == [], f"plaintext IOC left in {entry['name']}:{unit.relative_path}"


def test_unobfuscated_malicious_have_iocs(tmp_path):
    entries = generate(CorpusSpec(0, 8, obfuscated_fraction=0.0, seed=4), tmp_path)
    with_ioc = 0
    for entry in entries:
        artifact = load_package(tmp_path / entry["path"])
        for unit in artifact.units:
            if detect_iocs(parse_unit(unit)):
                with_ioc += 1
                break
    assert with_ioc == len(entries)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        CorpusSpec(1, 1, family_weights={f: 0.3 for f in FAMILIES})


def test_shifted_profile_adds_fp_prone_benign(tmp_path, catalog, patterns):
    entries = generate(CorpusSpec(60, 0, seed=13, benign_profile="shifted"), tmp_path)
    fired = 0
    for entry in entries:
        artifact = load_package(tmp_path / entry["path"])
        fired += int(behaviors_fired(artifact, catalog, patterns) > 0)
    assert fired > 0  # uploader-style benign packages fire behavior sequences
