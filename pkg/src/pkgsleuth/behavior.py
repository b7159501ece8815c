"""Security-sensitive API catalog, category sequences, and behavior matching.

The catalog maps 215 (module, api) pairs onto six categories. Per-file usage
sequences are encoded as ``_``-joined category tokens and matched against
five behavior regexes; a behavior's count is the number of non-overlapping
left-to-right matches.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import UncatalogedApi

CATEGORIES = ("NETWORK", "FILESYSTEM", "HOSTINFO", "CEXEC", "CMDEXEC", "ENCODING")

BEHAVIOR_NAMES = (
    "RemoteControl",
    "InformationStealing",
    "CodeExecution",
    "CommandExecution",
    "UnauthorizedFileOperations",
)

# grammar of the shipped behavior regexes: category tokens, "_", "\w*",
# alternation, optional groups
_PATTERN_GRAMMAR_RE = re.compile(
    r"^(?:NETWORK|FILESYSTEM|HOSTINFO|CEXEC|CMDEXEC|ENCODING|_|\\w\*|\||\(|\)\?|\))+$"
)


class ApiCatalog:
    """The 215-entry security-sensitive API catalog."""

    def __init__(self, entries: list[tuple[str, str, str]]):
        seen = set()
        for module, api, category in entries:
            if (module, api) in seen:
                raise ValueError(f"duplicate catalog entry ({module}, {api})")
            if category not in CATEGORIES:
                raise ValueError(f"unknown category {category!r} for ({module}, {api})")
            seen.add((module, api))
        self.entries = list(entries)
        self._by_key = {(m, a): c for m, a, c in entries}
        self._modules = {m for m, _, _ in entries}
        self._module_prefixes = set()
        for m in self._modules:
            parts = m.split(".")
            for i in range(1, len(parts) + 1):
                self._module_prefixes.add(".".join(parts[:i]))

    def __len__(self) -> int:
        return len(self.entries)

    def has(self, module: str, api: str) -> bool:
        return (module, api) in self._by_key

    def has_module(self, module: str) -> bool:
        return module in self._modules

    def has_module_prefix(self, dotted: str) -> bool:
        return dotted in self._module_prefixes

    def category_of(self, module: str, api: str) -> str:
        try:
            return self._by_key[(module, api)]
        except KeyError:
            raise UncatalogedApi(f"({module}, {api}) not in catalog") from None

    def modules(self) -> set[str]:
        return set(self._modules)


@dataclass(frozen=True)
class BehaviorPattern:
    name: str
    regex: str

    def __post_init__(self):
        if not _PATTERN_GRAMMAR_RE.match(self.regex):
            raise ValueError(f"pattern {self.name} uses tokens outside the grammar")


def _data_text(filename: str) -> str:
    return resources.files("pkgsleuth.data").joinpath(filename).read_text(encoding="utf-8")


def load_catalog(path: str | None = None) -> ApiCatalog:
    """Load the catalog from a TSV of ``module<TAB>api<TAB>CATEGORY`` lines."""
    if path is None:
        text = _data_text("api_catalog.tsv")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        module, api, category = line.split("\t")
        entries.append((module, api, category))
    return ApiCatalog(entries)


_DEFAULT_CATALOG: ApiCatalog | None = None


def default_catalog() -> ApiCatalog:
    """Process-wide instance of the packaged catalog (immutable in practice)."""
    global _DEFAULT_CATALOG
    if _DEFAULT_CATALOG is None:
        _DEFAULT_CATALOG = load_catalog()
    return _DEFAULT_CATALOG


def load_patterns(path: str | None = None) -> list[BehaviorPattern]:
    """Load behavior patterns from a TSV of ``name<TAB>regex`` lines."""
    if path is None:
        text = _data_text("behavior_patterns.tsv")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, regex = line.split("\t")
        patterns.append(BehaviorPattern(name, regex))
    return patterns


def categorize(usage, catalog: ApiCatalog) -> str:
    """Category of a resolved usage; raises UncatalogedApi otherwise."""
    return catalog.category_of(usage.module, usage.api)


def encode_sequence(categories: list[str]) -> str:
    """Join category tokens with ``_``; empty input encodes to ''."""
    return "_".join(categories)


def match_behaviors(encoded: str, patterns: list[BehaviorPattern]) -> dict[str, int]:
    """Count non-overlapping left-to-right matches of each behavior regex."""
    counts = {}
    for pattern in patterns:
        counts[pattern.name] = sum(1 for _ in re.finditer(pattern.regex, encoded))
    return counts
