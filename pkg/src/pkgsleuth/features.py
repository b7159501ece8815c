"""The 384-dimension static feature vector.

Groups and sizes: structural 96 (install hook, line/word counts, 91
per-extension file counts), api 215 (per-catalog-entry usage counts),
behavior 5, obfuscation 36 (6 pattern counts x 2 locations, entropy
statistics, homogeneous/heterogeneous counts), string 32 (URL/IP/suspicious
token/base64 counts and per-file character-ratio statistics).

Location semantics: metadata features are computed over ``setup.py`` only,
source features over ``.py`` source units only; api/behavior counts cover
both. Homogeneity: a string or identifier is homogeneous when all its
characters fall in a single class among letters, digits, punctuation
(empty values count as homogeneous). Identifier statistics are
occurrence-based and include attribute names; string entropies are computed
per literal and then summarized.
"""

from __future__ import annotations

import ast
import hashlib
import math
import re
import string as _string
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .behavior import ApiCatalog, BehaviorPattern, encode_sequence, load_catalog, load_patterns, match_behaviors
from .errors import SchemaMismatch
from .ingest import PackageArtifact, SourceUnit
from .srcmodel import extract_identifiers, extract_strings, parse_unit, resolve_api_calls

GROUP_SIZES = {"structural": 96, "api": 215, "behavior": 5, "obfuscation": 36, "string": 32}
TOTAL_FEATURES = 384

STAT_NAMES = ("mean", "std", "q3", "max")
LOCATIONS = ("source", "metadata")

BASE64_MIN_LEN = 20
_BASE64_RE = re.compile(r"[A-Za-z0-9+/]+={0,2}")
_URL_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9+.\-]*://[^\s'\"]+")
_IP_RE = re.compile(r"(?<!\d)(?:\d{1,3}\.){3}\d{1,3}(?!\d)")

# the six obfuscation-pattern detectors, in schema order
OBFUSCATION_PATTERNS = (
    ("basexx", re.compile(r"\b(?:urlsafe_|standard_)?b(?:16|32|64|85)(?:encode|decode)\s*\(")),
    ("hex", re.compile(r"\bfromhex\s*\(|\.hex\s*\(\s*\)|(?:\\x[0-9a-fA-F]{2}){4,}")),
    ("binary_array", re.compile(r"\b(?:bytes|bytearray)\s*\(")),
    (
        "string_splitting",
        re.compile(
            r"(?:(?:\"[^\"\n]*\"|'[^'\n]*')\s*\+\s*)+(?:\"[^\"\n]*\"|'[^'\n]*')|\.join\s*\("
        ),
    ),
    ("xor", re.compile(r"\bord\s*\([^)\n]*\)\s*\^|\^\s*ord\s*\(|\bxor\s*\(")),
    (
        "api_obfuscation",
        re.compile(r"__import__\s*\(|\.__call__\s*\(|\bgetattr\s*\(|\.__getattribute__\s*\(|\.__dict__\s*\["),
    ),
)

OBFUSCATION_PATTERN_NAMES = tuple(name for name, _ in OBFUSCATION_PATTERNS)

_INSTALL_HOOK_KEYS = ("install", "develop", "egg_info")


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    group: str  # structural | api | behavior | obfuscation | string
    location: str  # source | metadata | both
    kind: str  # boolean01 | count | statistic


@dataclass(frozen=True)
class StatSummary:
    mean: float
    std: float
    q3: float
    max: float

    def values(self) -> tuple[float, float, float, float]:
        return (self.mean, self.std, self.q3, self.max)


@dataclass
class FeatureVector:
    package_id: str
    values: list[float]
    schema_hash: str
    label: str | None = None


def shannon_entropy(s: str) -> float:
    """Character-frequency Shannon entropy in bits per symbol; '' -> 0."""
    if not s:
        return 0.0
    counts = Counter(s)
    n = len(s)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def stat_summary(values: list[float]) -> StatSummary:
    """Mean, population std, linearly interpolated Q3, max; [] -> zeros."""
    if not values:
        return StatSummary(0.0, 0.0, 0.0, 0.0)
    arr = np.asarray(values, dtype=float)
    return StatSummary(
        float(arr.mean()),
        float(arr.std(ddof=0)),
        float(np.percentile(arr, 75)),
        float(arr.max()),
    )


def _data_lines(filename: str) -> list[str]:
    text = resources.files("pkgsleuth.data").joinpath(filename).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def load_extensions(path: str | None = None) -> list[str]:
    if path is None:
        return _data_lines("extensions.txt")
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def load_suspicious_tokens(path: str | None = None) -> list[str]:
    if path is None:
        return _data_lines("suspicious_tokens.txt")
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def build_schema(catalog: ApiCatalog, patterns: list[BehaviorPattern], extensions: list[str]) -> list[FeatureDescriptor]:
    if len(extensions) != 91:
        raise ValueError(f"extension list must have exactly 91 entries, got {len(extensions)}")
    desc: list[FeatureDescriptor] = []
    # structural (96)
    desc.append(FeatureDescriptor("structural.setup_install_hook", "structural", "metadata", "boolean01"))
    for loc in LOCATIONS:
        desc.append(FeatureDescriptor(f"structural.line_count.{loc}", "structural", loc, "count"))
    for loc in LOCATIONS:
        desc.append(FeatureDescriptor(f"structural.word_count.{loc}", "structural", loc, "count"))
    for ext in extensions:
        desc.append(FeatureDescriptor(f"structural.ext_count.{ext.lstrip('.')}", "structural", "both", "count"))
    # api (215)
    for module, api, _ in catalog.entries:
        desc.append(FeatureDescriptor(f"api.{module}.{api}", "api", "both", "count"))
    # behavior (5)
    for pattern in patterns:
        desc.append(FeatureDescriptor(f"behavior.{pattern.name}", "behavior", "both", "count"))
    # obfuscation (36)
    for name in OBFUSCATION_PATTERN_NAMES:
        for loc in LOCATIONS:
            desc.append(FeatureDescriptor(f"obfuscation.pattern.{name}.{loc}", "obfuscation", loc, "count"))
    for loc in LOCATIONS:
        for stat in STAT_NAMES:
            desc.append(FeatureDescriptor(f"obfuscation.string_entropy.{stat}.{loc}", "obfuscation", loc, "statistic"))
    for loc in LOCATIONS:
        for stat in STAT_NAMES:
            desc.append(
                FeatureDescriptor(f"obfuscation.identifier_entropy.{stat}.{loc}", "obfuscation", loc, "statistic")
            )
    for kind in ("homogeneous", "heterogeneous"):
        for loc in LOCATIONS:
            desc.append(FeatureDescriptor(f"obfuscation.{kind}_strings.{loc}", "obfuscation", loc, "count"))
    for kind in ("homogeneous", "heterogeneous"):
        for loc in LOCATIONS:
            desc.append(FeatureDescriptor(f"obfuscation.{kind}_identifiers.{loc}", "obfuscation", loc, "count"))
    # string (32)
    for base in ("url_count", "ip_count", "suspicious_token_count", "base64_count"):
        for loc in LOCATIONS:
            desc.append(FeatureDescriptor(f"string.{base}.{loc}", "string", loc, "count"))
    for base in ("bracket_ratio", "equals_ratio", "plus_ratio"):
        for loc in LOCATIONS:
            for stat in STAT_NAMES:
                desc.append(FeatureDescriptor(f"string.{base}.{stat}.{loc}", "string", loc, "statistic"))

    names = [d.name for d in desc]
    if len(desc) != TOTAL_FEATURES or len(set(names)) != TOTAL_FEATURES:
        raise ValueError(f"schema must have 384 unique features, got {len(desc)}")
    return desc


def schema_hash(schema: list[FeatureDescriptor]) -> str:
    digest = hashlib.sha256()
    for d in schema:
        digest.update(f"{d.name}:{d.group}:{d.location}:{d.kind}\n".encode())
    return digest.hexdigest()[:16]


def _count_pattern(regex: re.Pattern, text: str) -> int:
    return sum(1 for _ in regex.finditer(text))


def count_obfuscation_patterns(unit: SourceUnit) -> dict[str, int]:
    """Counts of the six obfuscation patterns in one unit's text."""
    return {name: _count_pattern(regex, unit.text) for name, regex in OBFUSCATION_PATTERNS}


def _is_homogeneous(value: str) -> bool:
    if not value:
        return True
    for cls in (str.isalpha, str.isdigit):
        if all(cls(ch) for ch in value):
            return True
    return all(ch in _string.punctuation for ch in value)


def _is_base64_literal(value: str) -> bool:
    if len(value) < BASE64_MIN_LEN or len(value) % 4:
        return False
    return _BASE64_RE.fullmatch(value) is not None


def _setup_install_hook(tree) -> int:
    """1 when setup.py registers install-time hooks or runs nontrivial code.

    Rule: a ``cmdclass`` mapping carrying install/develop/egg_info keys, or
    any top-level statement beyond imports, assignments, defs, docstrings and
    the ``setup(...)`` call itself.
    """
    if tree is None:
        return 0
    if tree.raw_fallback or tree.root is None:
        text = tree.text
        return int("cmdclass" in text and any(k in text for k in _INSTALL_HOOK_KEYS))
    for node in ast.walk(tree.root):
        if isinstance(node, ast.keyword) and node.arg == "cmdclass":
            if isinstance(node.value, ast.Dict):
                for key in node.value.keys:
                    if isinstance(key, ast.Constant) and key.value in _INSTALL_HOOK_KEYS:
                        return 1
            else:
                return 1
        if isinstance(node, ast.Dict):
            # cmdclass passed through a kwargs dict
            for key in node.keys:
                if isinstance(key, ast.Constant) and key.value == "cmdclass":
                    return 1
    for stmt in tree.root.body:
        if isinstance(stmt, (ast.Import, ast.ImportFrom, ast.Assign, ast.AnnAssign, ast.AugAssign,
                             ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            continue
        if isinstance(stmt, ast.Expr):
            if isinstance(stmt.value, ast.Constant):
                continue  # docstring
            if isinstance(stmt.value, ast.Call):
                func = stmt.value.func
                name = func.id if isinstance(func, ast.Name) else getattr(func, "attr", "")
                if name == "setup":
                    continue
        if isinstance(stmt, ast.If):
            # `if __name__ == "__main__": setup()` style guards
            test = ast.dump(stmt.test)
            if "__name__" in test:
                continue
        return 1
    return 0


class FeatureExtractor:
    """Computes deterministic 384-vectors; degrades via raw fallback, never fails."""

    def __init__(
        self,
        catalog: ApiCatalog | None = None,
        patterns: list[BehaviorPattern] | None = None,
        extensions: list[str] | None = None,
        suspicious_tokens: list[str] | None = None,
    ):
        self.catalog = catalog or load_catalog()
        self.patterns = patterns or load_patterns()
        self.extensions = extensions or load_extensions()
        self.tokens = [t.lower() for t in (suspicious_tokens or load_suspicious_tokens())]
        self.schema = build_schema(self.catalog, self.patterns, self.extensions)
        self.schema_hash = schema_hash(self.schema)
        self._index = {d.name: i for i, d in enumerate(self.schema)}

    def extract(self, artifact: PackageArtifact) -> FeatureVector:
        values = [0.0] * TOTAL_FEATURES

        def set_(name, v):
            values[self._index[name]] = float(v)

        meta_units = [artifact.metadata_unit] if artifact.metadata_unit else []
        by_loc = {"source": artifact.source_units, "metadata": meta_units}
        trees = {}
        for unit in artifact.units:
            trees[unit.relative_path] = parse_unit(unit)

        # structural
        meta_tree = trees[artifact.metadata_unit.relative_path] if artifact.metadata_unit else None
        set_("structural.setup_install_hook", _setup_install_hook(meta_tree))
        for loc, units in by_loc.items():
            set_(f"structural.line_count.{loc}", sum(len(u.text.splitlines()) for u in units))
            set_(f"structural.word_count.{loc}", sum(len(u.text.split()) for u in units))
        ext_counts = Counter(ext for _, _, ext in artifact.file_inventory)
        for ext in self.extensions:
            set_(f"structural.ext_count.{ext.lstrip('.')}", ext_counts.get(ext, 0))

        # api + behavior (over all units)
        api_counts: Counter = Counter()
        behavior_counts: Counter = Counter()
        for unit in artifact.units:
            usages = resolve_api_calls(trees[unit.relative_path], self.catalog)
            cats = []
            for usage in usages:
                api_counts[(usage.module, usage.api)] += 1
                cats.append(self.catalog.category_of(usage.module, usage.api))
            for name, count in match_behaviors(encode_sequence(cats), self.patterns).items():
                behavior_counts[name] += count
        for module, api, _ in self.catalog.entries:
            set_(f"api.{module}.{api}", api_counts.get((module, api), 0))
        for pattern in self.patterns:
            set_(f"behavior.{pattern.name}", behavior_counts.get(pattern.name, 0))

        # obfuscation patterns per location
        for loc, units in by_loc.items():
            totals: Counter = Counter()
            for unit in units:
                for name, count in count_obfuscation_patterns(unit).items():
                    totals[name] += count
            for name in OBFUSCATION_PATTERN_NAMES:
                set_(f"obfuscation.pattern.{name}.{loc}", totals.get(name, 0))

        # entropy statistics and homogeneity, per location
        for loc, units in by_loc.items():
            literals = []
            idents = []
            for unit in units:
                tree = trees[unit.relative_path]
                literals.extend(extract_strings(tree))
                idents.extend(extract_identifiers(tree))
            str_entropy = stat_summary([shannon_entropy(lit.value) for lit in literals])
            ident_entropy = stat_summary([shannon_entropy(i.name) for i in idents])
            for stat, value in zip(STAT_NAMES, str_entropy.values()):
                set_(f"obfuscation.string_entropy.{stat}.{loc}", value)
            for stat, value in zip(STAT_NAMES, ident_entropy.values()):
                set_(f"obfuscation.identifier_entropy.{stat}.{loc}", value)
            homo_s = sum(1 for lit in literals if _is_homogeneous(lit.value))
            homo_i = sum(1 for i in idents if _is_homogeneous(i.name))
            set_(f"obfuscation.homogeneous_strings.{loc}", homo_s)
            set_(f"obfuscation.heterogeneous_strings.{loc}", len(literals) - homo_s)
            set_(f"obfuscation.homogeneous_identifiers.{loc}", homo_i)
            set_(f"obfuscation.heterogeneous_identifiers.{loc}", len(idents) - homo_i)

            # string-feature block
            url = ip = tok = b64 = 0
            for lit in literals:
                url += _count_pattern(_URL_RE, lit.value)
                ip += _count_pattern(_IP_RE, lit.value)
                low = lit.value.lower()
                tok += sum(low.count(t) for t in self.tokens)
                b64 += int(_is_base64_literal(lit.value))
            set_(f"string.url_count.{loc}", url)
            set_(f"string.ip_count.{loc}", ip)
            set_(f"string.suspicious_token_count.{loc}", tok)
            set_(f"string.base64_count.{loc}", b64)

            ratios = {"bracket_ratio": [], "equals_ratio": [], "plus_ratio": []}
            for unit in units:
                size = len(unit.text)
                if size == 0:
                    ratios["bracket_ratio"].append(0.0)
                    ratios["equals_ratio"].append(0.0)
                    ratios["plus_ratio"].append(0.0)
                    continue
                ratios["bracket_ratio"].append((unit.text.count("[") + unit.text.count("]")) / size)
                ratios["equals_ratio"].append(unit.text.count("=") / size)
                ratios["plus_ratio"].append(unit.text.count("+") / size)
            for base, samples in ratios.items():
                for stat, value in zip(STAT_NAMES, stat_summary(samples).values()):
                    set_(f"string.{base}.{stat}.{loc}", value)

        for i, v in enumerate(values):
            if not math.isfinite(v):
                raise AssertionError(f"non-finite feature {self.schema[i].name}")
        return FeatureVector(
            package_id=f"{artifact.name}-{artifact.version}",
            values=values,
            schema_hash=self.schema_hash,
            label=artifact.label,
        )


def extract_features(artifact: PackageArtifact, catalog: ApiCatalog | None = None,
                     patterns: list[BehaviorPattern] | None = None) -> FeatureVector:
    return FeatureExtractor(catalog, patterns).extract(artifact)


# --- feature store (CSV; first header cell carries the schema hash) ---

def write_store(path, vectors: list[FeatureVector], schema: list[FeatureDescriptor], digest: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = [f"id@{digest}"] + [d.name for d in schema] + ["label"]
        fh.write(",".join(header) + "\n")
        for vec in vectors:
            if vec.schema_hash != digest:
                raise SchemaMismatch(f"{vec.package_id}: vector hash {vec.schema_hash} != store hash {digest}")
            row = [vec.package_id] + [repr(v) for v in vec.values] + [vec.label or ""]
            fh.write(",".join(row) + "\n")


def append_store(path, vectors: list[FeatureVector], digest: str) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for vec in vectors:
            if vec.schema_hash != digest:
                raise SchemaMismatch(f"{vec.package_id}: vector hash {vec.schema_hash} != store hash {digest}")
            row = [vec.package_id] + [repr(v) for v in vec.values] + [vec.label or ""]
            fh.write(",".join(row) + "\n")


def read_store(path) -> tuple[str, list[str], np.ndarray, list[str], list[str]]:
    """Returns (schema_hash, feature names, X, labels, package ids)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or "@" not in header[0]:
            raise SchemaMismatch(f"{path}: missing schema hash in header")
        digest = header[0].split("@", 1)[1]
        names = header[1:-1]
        ids, labels, rows = [], [], []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split(",")
            ids.append(cells[0])
            labels.append(cells[-1])
            rows.append([float(c) for c in cells[1:-1]])
    X = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(names)))
    return digest, names, X, labels, ids
