"""Package acquisition: local paths, source archives, and dataset manifests.

Normalizes a package release into a :class:`PackageArtifact` holding the
decoded ``setup.py`` build script (the metadata unit), every ``.py`` source
unit, and a full file inventory. Hostile inputs are expected: decoding never
fails (invalid bytes are replaced) and archive members that escape the
extraction root are skipped.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tarfile
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath

from .errors import NoSourceCode, UnreadableArchive

logger = logging.getLogger(__name__)

ARCHIVE_SUFFIXES = (".tar.gz", ".tgz", ".zip", ".whl", ".tar")


@dataclass(frozen=True)
class SourceUnit:
    """One decoded analyzed file: the build script or a ``.py`` module."""

    relative_path: str
    text: str
    kind: str  # "metadata" | "source"

    def __post_init__(self):
        basename = PurePosixPath(self.relative_path).name
        expected = "metadata" if basename == "setup.py" else "source"
        if self.kind != expected:
            raise ValueError(f"unit kind {self.kind!r} inconsistent with path {self.relative_path!r}")


@dataclass
class PackageArtifact:
    """A normalized package release ready for feature extraction."""

    name: str
    version: str
    metadata_unit: SourceUnit | None
    source_units: list[SourceUnit]
    file_inventory: list[tuple[str, int, str]]  # (relative path, byte size, extension)
    origin: str = "local"  # "local" | "feed"
    label: str | None = None  # "benign" | "malicious" | None
    provenance: list[dict] = field(default_factory=list)

    @property
    def units(self) -> list[SourceUnit]:
        out = list(self.source_units)
        if self.metadata_unit is not None:
            out.append(self.metadata_unit)
        return out

    def unit(self, relative_path: str) -> SourceUnit:
        for u in self.units:
            if u.relative_path == relative_path:
                return u
        raise KeyError(relative_path)

    def with_unit(self, new_unit: SourceUnit) -> "PackageArtifact":
        """Return a copy with one unit's text replaced (same path)."""
        if self.metadata_unit is not None and self.metadata_unit.relative_path == new_unit.relative_path:
            return replace(self, metadata_unit=new_unit, source_units=list(self.source_units),
                           provenance=list(self.provenance))
        sources = []
        hit = False
        for u in self.source_units:
            if u.relative_path == new_unit.relative_path:
                sources.append(new_unit)
                hit = True
            else:
                sources.append(u)
        if not hit:
            raise KeyError(new_unit.relative_path)
        return replace(self, source_units=sources, provenance=list(self.provenance))


@dataclass(frozen=True)
class ReleaseRef:
    """A release announced on a registry feed."""

    name: str
    version: str
    published_at: str  # ISO 8601
    archive_url: str

    def __post_init__(self):
        if not self.archive_url:
            raise ValueError("archive_url must be non-empty")


@dataclass(frozen=True)
class LabelRecord:
    name: str
    verdict: str  # "benign" | "malicious"
    source: str  # "ossf" | "pypi" | "manual"


def _decode(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")


def _extension(path: str) -> str:
    ext = PurePosixPath(path).suffix.lower()
    return ext


def _is_within(base: Path, target: Path) -> bool:
    try:
        target.resolve().relative_to(base.resolve())
        return True
    except ValueError:
        return False


def _normalize_member(path: str) -> str | None:
    """Posix-normalize an archive member path; None if it escapes the root."""
    p = PurePosixPath(path.replace("\\", "/"))
    parts = []
    for part in p.parts:
        if part in ("", "."):
            continue
        if part == ".." or (len(part) > 1 and part[1] == ":"):
            return None
        if part.startswith("/"):
            continue
        parts.append(part)
    if not parts:
        return None
    return "/".join(parts)


def _strip_common_root(paths: list[str]) -> dict[str, str]:
    """Map member paths to root-relative ones when the archive has a single top dir.

    Sdists pack everything under ``name-version/``; the artifact's relative
    paths drop that wrapper so ``setup.py`` lands at the root.
    """
    tops = {p.split("/", 1)[0] for p in paths}
    if len(tops) == 1 and all("/" in p for p in paths):
        return {p: p.split("/", 1)[1] for p in paths}
    return {p: p for p in paths}


def _build_artifact(name: str, version: str, files: list[tuple[str, bytes]], origin: str) -> PackageArtifact:
    inventory = []
    source_units = []
    metadata_unit = None
    seen = set()
    stripped = _strip_common_root([p for p, _ in files]) if files else {}
    for raw_path, data in files:
        rel = stripped.get(raw_path, raw_path)
        if rel in seen:
            continue
        seen.add(rel)
        inventory.append((rel, len(data), _extension(rel)))
        if rel == "setup.py":
            metadata_unit = SourceUnit(rel, _decode(data), "metadata")
        elif rel.endswith(".py"):
            source_units.append(SourceUnit(rel, _decode(data), "source"))
    inventory.sort(key=lambda t: t[0])
    source_units.sort(key=lambda u: u.relative_path)
    if metadata_unit is None and not source_units:
        raise NoSourceCode(f"{name} {version}: no .py source and no setup.py")
    return PackageArtifact(
        name=name,
        version=version,
        metadata_unit=metadata_unit,
        source_units=source_units,
        file_inventory=inventory,
        origin=origin,
    )


def _read_dir(path: Path) -> list[tuple[str, bytes]]:
    files = []
    for p in sorted(path.rglob("*")):
        if not p.is_file():
            continue
        rel = p.relative_to(path).as_posix()
        files.append((rel, p.read_bytes()))
    return files


def _read_tar(path: Path) -> list[tuple[str, bytes]]:
    files = []
    try:
        with tarfile.open(path, "r:*") as tf:
            for member in tf.getmembers():
                if not member.isfile():
                    continue
                rel = _normalize_member(member.name)
                if rel is None:
                    logger.warning("skipping traversal member %r in %s", member.name, path)
                    continue
                fh = tf.extractfile(member)
                if fh is None:
                    continue
                files.append((rel, fh.read()))
    except (tarfile.TarError, EOFError, OSError) as exc:
        raise UnreadableArchive(f"{path}: {exc}") from exc
    return files


def _read_zip(path: Path) -> list[tuple[str, bytes]]:
    files = []
    try:
        with zipfile.ZipFile(path) as zf:
            for info in zf.infolist():
                if info.is_dir():
                    continue
                rel = _normalize_member(info.filename)
                if rel is None:
                    logger.warning("skipping traversal member %r in %s", info.filename, path)
                    continue
                files.append((rel, zf.read(info)))
    except (zipfile.BadZipFile, OSError) as exc:
        raise UnreadableArchive(f"{path}: {exc}") from exc
    return files


def _name_version_from_stem(stem: str) -> tuple[str, str]:
    # sdist convention: <name>-<version>; fall back to the whole stem
    if "-" in stem:
        name, _, version = stem.rpartition("-")
        if version and version[0].isdigit():
            return name, version
    return stem, "0"


def load_package(path: str | os.PathLike, origin: str = "local") -> PackageArtifact:
    """Load a package release from a directory or a .tar.gz/.zip archive.

    Raises UnreadableArchive for corrupt or unsupported containers and
    NoSourceCode when neither source nor metadata units are present.
    """
    p = Path(path)
    if p.is_dir():
        files = _read_dir(p)
        name, version = _name_version_from_stem(p.name)
        return _build_artifact(name, version, files, origin)
    if not p.exists():
        raise UnreadableArchive(f"{p}: no such file")
    lower = p.name.lower()
    if lower.endswith((".tar.gz", ".tgz", ".tar")):
        files = _read_tar(p)
        stem = lower
        for suf in (".tar.gz", ".tgz", ".tar"):
            if stem.endswith(suf):
                stem = p.name[: -len(suf)]
                break
    elif lower.endswith((".zip", ".whl")):
        files = _read_zip(p)
        stem = p.name.rsplit(".", 1)[0]
    else:
        raise UnreadableArchive(f"{p}: unsupported container")
    name, version = _name_version_from_stem(stem)
    return _build_artifact(name, version, files, origin)


def write_artifact(artifact: PackageArtifact, dest: str | os.PathLike) -> Path:
    """Materialize an artifact's units to a directory tree (for rescanning)."""
    base = Path(dest)
    base.mkdir(parents=True, exist_ok=True)
    for unit in artifact.units:
        target = base / unit.relative_path
        if not _is_within(base, target):
            logger.warning("refusing to write outside dest: %s", unit.relative_path)
            continue
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(unit.text, encoding="utf-8")
    return base


def apply_labels(artifacts: list[PackageArtifact], records: list[LabelRecord]) -> list[str]:
    """Set artifact labels from records; malicious wins on conflicts.

    Returns the names of records that matched no artifact.
    """
    verdicts: dict[str, str] = {}
    for rec in records:
        prev = verdicts.get(rec.name)
        if prev == "malicious":
            continue
        verdicts[rec.name] = "malicious" if rec.verdict == "malicious" else prev or rec.verdict
    matched = set()
    for artifact in artifacts:
        verdict = verdicts.get(artifact.name)
        if verdict is not None:
            artifact.label = verdict
            matched.add(artifact.name)
    unmatched = sorted(set(verdicts) - matched)
    if unmatched:
        logger.info("labels without matching packages: %s", ", ".join(unmatched))
    return unmatched


def read_label_csv(path: str | os.PathLike) -> list[LabelRecord]:
    """Label files are CSV rows of ``name,verdict,source``."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0] == "name":
                continue
            name, verdict, source = (c.strip() for c in row[:3])
            records.append(LabelRecord(name, verdict, source))
    return records


# --- dataset manifest: one JSON record per line ---

MANIFEST_FIELDS = ("name", "version", "path", "label", "origin", "published_at")


def write_manifest(entries: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps({k: entry.get(k) for k in MANIFEST_FIELDS}, sort_keys=True) + "\n")


def read_manifest(path: str | os.PathLike) -> list[dict]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(json.loads(line))
    return entries


def manifest_id(entry: dict) -> str:
    return f"{entry['name']}-{entry['version']}"


def resolve_manifest_path(manifest_path: str | os.PathLike, entry: dict) -> Path:
    """Entry paths are stored relative to the manifest when possible."""
    p = Path(entry["path"])
    return p if p.is_absolute() else Path(manifest_path).parent / p
