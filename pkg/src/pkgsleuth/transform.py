"""Functionality-preserving adversarial source transformations.

Six transformations rewrite detected IOC strings and sensitive API usages:
string encoding (Base64/Base32/Base16/hex), binary-array construction,
split-and-reorder (five reassembly variants), sensitive-import renaming,
inert-code injection, and API obfuscation (``__import__``, ``__call__``,
``getattr``, ``__getattribute__``, ``__dict__``).

All rewriting is span-based on the original text (no pretty-printing), so
untouched bytes stay stable and diffs remain reviewable. Every transformed
unit must re-parse; ``apply_plan`` enforces that per step.
"""

from __future__ import annotations

import ast
import base64 as _b64
import json
import keyword
import random
import re
import string as _string
from dataclasses import dataclass, field, replace

from .behavior import ApiCatalog
from .errors import InvalidSplit, PlanError, TargetNotFound
from .ingest import PackageArtifact, SourceUnit
from .srcmodel import (
    StringLiteral,
    SyntaxTree,
    extract_identifiers,
    extract_strings,
    node_span,
    parse_unit,
    resolve_api_calls,
)

ENCODE_SCHEMES = ("base64", "base32", "base16", "hex")
REORDER_VARIANTS = ("plus_concat", "join", "format", "fstring", "loop_concat")
API_VARIANTS = ("dynamic_import", "dunder_call", "getattr_ref", "getattribute_ref", "dict_ref")

_URL_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9+.\-]*://\S+")
_IP_RE = re.compile(r"(?:\d{1,3}\.){3}\d{1,3}")
_SHELL_TOKEN_RE = re.compile(
    r"(?:^|[\s;|&])(?:bash|sh|zsh|dash|cmd(?:\.exe)?|powershell|curl|wget|nc|netcat|"
    r"mkfifo|chmod|rm|python[23]?|perl|ruby|osascript|certutil)(?:$|[\s;|&.])"
)
_SHELL_CHAIN_RE = re.compile(r">&|\d>|&&|\|\||\|\s|;\s")


@dataclass(frozen=True)
class IocString:
    literal: StringLiteral
    kind: str  # url | ip | command


def classify_ioc(value: str) -> str | None:
    if not value:
        return None
    stripped = value.strip()
    if _URL_RE.fullmatch(stripped):
        return "url"
    if _IP_RE.fullmatch(stripped):
        return "ip"
    if _SHELL_TOKEN_RE.search(value) and (" " in value or _SHELL_CHAIN_RE.search(value)):
        return "command"
    if _SHELL_CHAIN_RE.search(value) and _IP_RE.search(value):
        return "command"
    if _URL_RE.search(value):
        return "url"
    return None


def detect_iocs(tree: SyntaxTree) -> list[IocString]:
    """Classify every string literal as url, ip, or command; others excluded."""
    out = []
    for literal in extract_strings(tree):
        kind = classify_ioc(literal.value)
        if kind is not None:
            out.append(IocString(literal, kind))
    return out


# --- span/offset machinery ---


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _span_offsets(text: str, span) -> tuple[int, int]:
    """Character offsets for an ast span; ast columns count utf-8 bytes."""
    starts = _line_starts(text)
    lineno, col, end_lineno, end_col = span

    def char_offset(line: int, byte_col: int) -> int:
        line_start = starts[line - 1]
        line_end = starts[line] - 1 if line < len(starts) else len(text)
        line_text = text[line_start:line_end]
        if line_text.isascii():
            return line_start + byte_col
        prefix = line_text.encode("utf-8")[:byte_col].decode("utf-8", errors="ignore")
        return line_start + len(prefix)

    return char_offset(lineno, col), char_offset(end_lineno, end_col)


def _apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    """Apply non-overlapping (start, end, replacement) edits."""
    ordered = sorted(edits, key=lambda e: (e[0], e[1]), reverse=True)
    for start, end, rep in ordered:
        text = text[:start] + rep + text[end:]
    return text


def _parse_or_raise(unit: SourceUnit) -> tuple[SyntaxTree, ast.Module]:
    tree = parse_unit(unit)
    if not tree.parse_ok or tree.root is None:
        raise TargetNotFound(f"{unit.relative_path}: unit does not parse; cannot rewrite")
    return tree, tree.root


def _string_nodes(root: ast.Module) -> list[ast.Constant]:
    """Rewritable string literals; f-string segments are not expressions."""
    fstring_parts = set()
    for node in ast.walk(root):
        if isinstance(node, ast.JoinedStr):
            for part in node.values:
                if isinstance(part, ast.Constant):
                    fstring_parts.add(id(part))
    nodes = []
    for node in ast.walk(root):
        if isinstance(node, ast.Constant) and isinstance(node.value, str) and id(node) not in fstring_parts:
            nodes.append(node)
    nodes.sort(key=node_span)
    return nodes


def _locate_literal(root: ast.Module, target: IocString) -> ast.Constant:
    candidates = [n for n in _string_nodes(root) if n.value == target.literal.value]
    if not candidates:
        raise TargetNotFound(f"literal {target.literal.value!r} not found")
    for node in candidates:
        if node_span(node) == target.literal.span:
            return node
    return candidates[0]


def _identifier_names(tree: SyntaxTree) -> set[str]:
    return {ident.name for ident in extract_identifiers(tree)}


def _fresh_name(rng: random.Random, taken: set[str]) -> str:
    while True:
        length = rng.randint(8, 12)
        name = "_" + "".join(rng.choice(_string.ascii_lowercase) for _ in range(length))
        if name not in taken and not keyword.iskeyword(name):
            taken.add(name)
            return name


def _import_insert_offset(text: str, root: ast.Module) -> int:
    """Offset after the module docstring and __future__ imports."""
    starts = _line_starts(text)
    line = 0
    for i, stmt in enumerate(root.body):
        is_doc = (
            i == 0
            and isinstance(stmt, ast.Expr)
            and isinstance(stmt.value, ast.Constant)
            and isinstance(stmt.value.value, str)
        )
        is_future = isinstance(stmt, ast.ImportFrom) and stmt.module == "__future__"
        if is_doc or is_future:
            line = stmt.end_lineno
            continue
        break
    if line >= len(starts):
        return len(text)
    return starts[line]


def _has_import(root: ast.Module, module: str) -> bool:
    for node in ast.walk(root):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.name == module and alias.asname is None:
                    return True
    return False


def _containing_statements(root: ast.Module, span) -> list[ast.stmt]:
    """Statements whose span contains the target span, outermost first."""
    chain = []

    def contains(node: ast.AST) -> bool:
        ns = node_span(node)
        return (ns[0], ns[1]) <= (span[0], span[1]) and (span[2], span[3]) <= (ns[2], ns[3])

    def descend(node: ast.AST):
        for child in ast.iter_child_nodes(node):
            if isinstance(child, ast.stmt) and contains(child):
                chain.append(child)
            if hasattr(child, "lineno") and not contains(child):
                continue
            descend(child)

    descend(root)
    return chain


def _statement_anchor(text: str, root: ast.Module, span) -> tuple[int, str]:
    """(insertion offset, indentation) of the innermost line-starting statement
    containing the span."""
    starts = _line_starts(text)
    best = None
    for stmt in _containing_statements(root, span):
        line_start = starts[stmt.lineno - 1]
        prefix = text[line_start : line_start + stmt.col_offset]
        if prefix.strip() == "":
            best = (line_start, " " * stmt.col_offset)
    if best is None:
        raise TargetNotFound("no line-starting statement anchors the target")
    return best


# --- encoding transformations ---


def _encode_expression(value: str, scheme: str) -> str:
    raw = value.encode("utf-8")
    if scheme == "base64":
        return f'base64.b64decode("{_b64.b64encode(raw).decode()}").decode()'
    if scheme == "base32":
        return f'base64.b32decode("{_b64.b32encode(raw).decode()}").decode()'
    if scheme == "base16":
        return f'base64.b16decode("{_b64.b16encode(raw).decode()}").decode()'
    if scheme == "hex":
        return f'bytes.fromhex("{raw.hex()}").decode()'
    raise ValueError(f"unknown scheme {scheme!r}")


def t_encode(unit: SourceUnit, target: IocString, scheme: str) -> SourceUnit:
    """Replace the target literal with an encoded constant plus inline decode."""
    tree, root = _parse_or_raise(unit)
    node = _locate_literal(root, target)
    start, end = _span_offsets(unit.text, node_span(node))
    edits = [(start, end, _encode_expression(node.value, scheme))]
    if scheme in ("base64", "base32", "base16") and not _has_import(root, "base64"):
        pos = _import_insert_offset(unit.text, root)
        edits.append((pos, pos, "import base64\n"))
    return replace(unit, text=_apply_edits(unit.text, edits))


def t_binary_array(unit: SourceUnit, target: IocString, ctor: str = "bytes") -> SourceUnit:
    """Replace the target literal with a byte-value array decoded at use site."""
    if not target.literal.value:
        raise TargetNotFound("empty string is never an IOC target")
    tree, root = _parse_or_raise(unit)
    node = _locate_literal(root, target)
    start, end = _span_offsets(unit.text, node_span(node))
    values = ", ".join(str(b) for b in node.value.encode("utf-8"))
    rep = f"{ctor}([{values}]).decode()"
    return replace(unit, text=_apply_edits(unit.text, [(start, end, rep)]))


# --- reordering ---


def _split_parts(value: str, parts: int, rng: random.Random) -> list[str]:
    if parts < 2 or parts > len(value):
        raise InvalidSplit(f"cannot split length-{len(value)} string into {parts} parts")
    cuts = sorted(rng.sample(range(1, len(value)), parts - 1))
    pieces = []
    prev = 0
    for cut in cuts + [len(value)]:
        pieces.append(value[prev:cut])
        prev = cut
    return pieces


def t_reorder(unit: SourceUnit, target: IocString, variant: str, parts: int,
              rng: random.Random | None = None) -> SourceUnit:
    """Split the literal into contiguous substrings reassembled at runtime."""
    if variant not in REORDER_VARIANTS:
        raise ValueError(f"unknown reorder variant {variant!r}")
    rng = rng or random.Random(0)
    tree, root = _parse_or_raise(unit)
    node = _locate_literal(root, target)
    pieces = _split_parts(node.value, parts, rng)
    rendered = [repr(p) for p in pieces]
    start, end = _span_offsets(unit.text, node_span(node))
    edits: list[tuple[int, int, str]] = []

    if variant == "plus_concat":
        edits.append((start, end, "(" + " + ".join(rendered) + ")"))
    elif variant == "join":
        edits.append((start, end, '"".join([' + ", ".join(rendered) + "])"))
    elif variant == "format":
        template = "{}" * len(pieces)
        edits.append((start, end, f'"{template}".format(' + ", ".join(rendered) + ")"))
    else:
        taken = _identifier_names(tree)
        anchor, indent = _statement_anchor(unit.text, root, node_span(node))
        if variant == "fstring":
            names = [_fresh_name(rng, taken) for _ in pieces]
            lines = "".join(f"{indent}{n} = {r}\n" for n, r in zip(names, rendered))
            joined = "".join("{" + n + "}" for n in names)
            edits.append((anchor, anchor, lines))
            edits.append((start, end, f'f"{joined}"'))
        else:  # loop_concat
            parts_name = _fresh_name(rng, taken)
            acc_name = _fresh_name(rng, taken)
            item_name = _fresh_name(rng, taken)
            lines = (
                f"{indent}{parts_name} = [" + ", ".join(rendered) + "]\n"
                f'{indent}{acc_name} = ""\n'
                f"{indent}for {item_name} in {parts_name}:\n"
                f"{indent}    {acc_name} = {acc_name} + {item_name}\n"
            )
            edits.append((anchor, anchor, lines))
            edits.append((start, end, acc_name))
    return replace(unit, text=_apply_edits(unit.text, edits))


# --- renaming sensitive imports ---


def _sensitive_bindings(root: ast.Module, catalog: ApiCatalog):
    """(alias node, bound name, rendered rebinding template) per sensitive import."""
    bindings = []
    for node in ast.walk(root):
        if isinstance(node, ast.ImportFrom) and node.module:
            for alias in node.names:
                if catalog.has(node.module, alias.name) or catalog.has_module_prefix(
                    f"{node.module}.{alias.name}"
                ):
                    bindings.append((alias, alias.asname or alias.name, alias.name))
        elif isinstance(node, ast.Import):
            for alias in node.names:
                if catalog.has_module_prefix(alias.name):
                    bound = alias.asname or alias.name.split(".")[0]
                    if "." not in alias.name or alias.asname:
                        bindings.append((alias, bound, alias.name))
    return bindings


def t_rename(unit: SourceUnit, catalog: ApiCatalog, rng: random.Random | None = None) -> SourceUnit:
    """Re-alias sensitive imported names to fresh identifiers, updating all uses.

    Units without sensitive imports come back byte-identical.
    """
    rng = rng or random.Random(0)
    tree = parse_unit(unit)
    if not tree.parse_ok or tree.root is None:
        return unit
    root = tree.root
    bindings = _sensitive_bindings(root, catalog)
    if not bindings:
        return unit
    taken = _identifier_names(tree)
    edits = []
    renamed: dict[str, str] = {}
    for alias, bound, original in bindings:
        if bound in renamed:
            continue
        fresh = _fresh_name(rng, taken)
        renamed[bound] = fresh
        start, end = _span_offsets(unit.text, node_span(alias))
        edits.append((start, end, f"{original} as {fresh}"))
    for node in ast.walk(root):
        if isinstance(node, ast.Name) and node.id in renamed:
            start, end = _span_offsets(unit.text, node_span(node))
            edits.append((start, end, renamed[node.id]))
    return replace(unit, text=_apply_edits(unit.text, edits))


# --- inert code injection ---


def load_inject_templates() -> list[dict]:
    from importlib import resources

    text = resources.files("pkgsleuth.data").joinpath("inject_templates.json").read_text(encoding="utf-8")
    return json.loads(text)


_WORDS = (
    "cache", "buffer", "config", "context", "padding", "legacy", "shim",
    "metrics", "session", "cursor", "registry", "adapter", "helper",
)


def _module_boundaries(text: str, root: ast.Module) -> list[int]:
    """Offsets of top-level statement starts (plus EOF) where lines can go."""
    starts = _line_starts(text)
    offsets = []
    for stmt in root.body:
        first_line = stmt.lineno
        for deco in getattr(stmt, "decorator_list", []):
            first_line = min(first_line, deco.lineno)
        offsets.append(starts[first_line - 1])
    tail = len(text)
    offsets.append(tail)
    return sorted(set(offsets))


def t_inject(unit: SourceUnit, budget: int, rng: random.Random | None = None,
             templates: list[dict] | None = None) -> SourceUnit:
    """Insert ``budget`` inert elements at module statement boundaries."""
    if budget <= 0:
        return unit
    rng = rng or random.Random(0)
    templates = templates or load_inject_templates()
    text = unit.text
    if text and not text.endswith("\n"):
        text += "\n"
    normalized = replace(unit, text=text)
    tree = parse_unit(normalized)
    if not tree.parse_ok or tree.root is None:
        return unit
    taken = _identifier_names(tree)
    boundaries = _module_boundaries(text, tree.root)
    edits = []
    for _ in range(budget):
        template = rng.choice(templates)
        fills = {
            "name": None,
            "name2": None,
            "word": rng.choice(_WORDS),
            "number": rng.randint(1, 999),
            "number2": rng.randint(1, 999),
        }
        lines = []
        for line in template["lines"]:
            if "{name}" in line and fills["name"] is None:
                fills["name"] = _fresh_name(rng, taken)
            if "{name2}" in line and fills["name2"] is None:
                fills["name2"] = _fresh_name(rng, taken)
            lines.append(
                line.replace("{name}", fills["name"] or "")
                .replace("{name2}", fills["name2"] or "")
                .replace("{word}", str(fills["word"]))
                .replace("{number}", str(fills["number"]))
                .replace("{number2}", str(fills["number2"]))
            )
        pos = rng.choice(boundaries)
        edits.append((pos, pos, "".join(f"{l}\n" for l in lines)))
    return replace(unit, text=_apply_edits(text, edits))


# --- API obfuscation ---


def _usage_call_nodes(root: ast.Module, catalog: ApiCatalog) -> list[tuple[ast.Call, str, str]]:
    """Call nodes whose func resolves against the catalog, with (module, api)."""
    tree_usages = []
    spans = {}
    for node in ast.walk(root):
        if isinstance(node, ast.Call):
            spans[node_span(node)] = node
    synthetic = SyntaxTree("<unit>", root, True, False, "", "source")
    for usage in resolve_api_calls(synthetic, catalog):
        node = spans.get(usage.span)
        if node is not None:
            tree_usages.append((node, usage.module, usage.api))
    return tree_usages


def _render(text: str, node: ast.AST) -> str:
    start, end = _span_offsets(text, node_span(node))
    return text[start:end]


def t_api_obfuscate(unit: SourceUnit, usage, variant: str,
                    catalog: ApiCatalog | None = None) -> SourceUnit:
    """Rewrite one usage (or its import) with an equivalent polymorphic syntax."""
    if variant not in API_VARIANTS:
        raise ValueError(f"unknown api-obfuscation variant {variant!r}")
    tree, root = _parse_or_raise(unit)

    if variant == "dynamic_import":
        edits = _dynamic_import_edits(unit.text, root, usage.module)
        if not edits:
            raise TargetNotFound(f"no rewritable import of {usage.module!r}")
        return replace(unit, text=_apply_edits(unit.text, edits))

    if catalog is None:
        from .behavior import default_catalog

        catalog = default_catalog()
    wanted = getattr(usage, "span", None)
    for node, module, api in _usage_call_nodes(root, catalog):
        if module != usage.module or api != usage.api:
            continue
        # nested rewrites shift a span's end but never its start
        if wanted is not None and node_span(node)[:2] != tuple(wanted[:2]):
            continue
        edit = _call_site_edit(unit.text, node, api, variant)
        if edit is None:
            continue
        return replace(unit, text=_apply_edits(unit.text, [edit]))
    raise TargetNotFound(f"usage ({usage.module}, {usage.api}) not rewritable with {variant}")


def _call_site_edit(text: str, node: ast.Call, api: str, variant: str):
    func = node.func
    if variant == "dunder_call":
        fstart, fend = _span_offsets(text, node_span(func))
        return (fend, fend, ".__call__")
    # rewrite the attribute reference itself, looking through __call__ wrappers
    while isinstance(func, ast.Attribute) and func.attr == "__call__":
        func = func.value
    if not isinstance(func, ast.Attribute) or func.attr != api:
        return None
    fstart, fend = _span_offsets(text, node_span(func))
    base_src = _render(text, func.value)
    if variant == "getattr_ref":
        return (fstart, fend, f'getattr({base_src}, "{api}")')
    if variant == "getattribute_ref":
        return (fstart, fend, f'{base_src}.__getattribute__("{api}")')
    if variant == "dict_ref":
        return (fstart, fend, f'{base_src}.__dict__["{api}"]')
    return None


def _dynamic_import_edits(text: str, root: ast.Module, module: str) -> list[tuple[int, int, str]]:
    edits = []
    for node in ast.walk(root):
        if isinstance(node, ast.Import):
            hit = None
            rest = []
            for alias in node.names:
                if alias.name == module:
                    hit = alias
                else:
                    rest.append(alias)
            if hit is None:
                continue
            bound = hit.asname or module.split(".")[0]
            if "." in module and hit.asname is None:
                continue  # `import a.b` binds `a`; rewriting changes nothing detectably
            assign = f'{bound} = __import__("{module}")'
            if rest:
                kept = ", ".join(a.name + (f" as {a.asname}" if a.asname else "") for a in rest)
                rep = f"import {kept}; {assign}"
            else:
                rep = assign
            start, end = _span_offsets(text, node_span(node))
            edits.append((start, end, rep))
        elif isinstance(node, ast.ImportFrom) and node.module == module:
            pieces = []
            for alias in node.names:
                bound = alias.asname or alias.name
                pieces.append(f'{bound} = getattr(__import__("{module}"), "{alias.name}")')
            start, end = _span_offsets(text, node_span(node))
            edits.append((start, end, "; ".join(pieces)))
    return edits


# --- plans ---


@dataclass
class PlanStep:
    transform: str
    selector: dict
    params: dict
    seed: int

    @property
    def round_kind(self) -> str:
        return "MR" if self.transform == "inject" else "SR"

    def to_dict(self) -> dict:
        return {
            "transform": self.transform,
            "selector": self.selector,
            "params": self.params,
            "seed": self.seed,
            "round_kind": self.round_kind,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanStep":
        return cls(data["transform"], dict(data["selector"]), dict(data["params"]), int(data["seed"]))


@dataclass
class TransformationPlan:
    steps: list[PlanStep] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"steps": [s.to_dict() for s in self.steps]}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TransformationPlan":
        data = json.loads(text)
        return cls([PlanStep.from_dict(s) for s in data["steps"]])


def _units_for(artifact: PackageArtifact, selector: dict) -> list[SourceUnit]:
    unit_sel = selector.get("unit", "*")
    if unit_sel == "*":
        return list(artifact.units)
    return [artifact.unit(unit_sel)]


@dataclass
class _UsageRef:
    module: str
    api: str
    span: tuple | None = None


def _apply_data_obfuscation(artifact: PackageArtifact, step: PlanStep) -> PackageArtifact:
    rng = random.Random(step.seed)
    kind = step.selector.get("ioc_kind", "*")
    wanted_value = step.selector.get("value")
    for unit in _units_for(artifact, step.selector):
        tree = parse_unit(unit)
        if not tree.parse_ok:
            continue
        targets = [
            ioc
            for ioc in detect_iocs(tree)
            if (kind == "*" or ioc.kind == kind) and (wanted_value is None or ioc.literal.value == wanted_value)
        ]
        if not targets:
            if wanted_value is not None and step.selector.get("unit", "*") != "*":
                raise TargetNotFound(f"{unit.relative_path}: no IOC literal {wanted_value!r}")
            continue
        current = unit
        # rewrite right-to-left so earlier spans stay valid within this parse
        for ioc in sorted(targets, key=lambda i: i.literal.span, reverse=True):
            try:
                if step.transform == "encode":
                    scheme = step.params.get("scheme") or rng.choice(ENCODE_SCHEMES)
                    current = t_encode(current, ioc, scheme)
                elif step.transform == "binary_array":
                    current = t_binary_array(current, ioc, step.params.get("ctor", "bytes"))
                elif step.transform == "reorder":
                    variant = step.params.get("variant") or rng.choice(REORDER_VARIANTS)
                    max_parts = max(2, min(int(step.params.get("parts", rng.randint(2, 5))), len(ioc.literal.value)))
                    if len(ioc.literal.value) < 2:
                        continue
                    current = t_reorder(current, ioc, variant, max_parts, rng)
            except TargetNotFound:
                continue  # e.g. a literal living inside an f-string segment
        artifact = artifact.with_unit(current)
    return artifact


def _apply_api_obfuscation(artifact: PackageArtifact, step: PlanStep, catalog: ApiCatalog) -> PackageArtifact:
    rng = random.Random(step.seed)
    pool = step.params.get("pool") or ["getattr_ref", "getattribute_ref", "dict_ref", "dunder_call"]
    site = step.params.get("site", "call")
    module_sel = step.selector.get("module", "*")
    api_sel = step.selector.get("api", "*")
    for unit in _units_for(artifact, step.selector):
        tree = parse_unit(unit)
        if not tree.parse_ok or tree.root is None:
            continue
        current = unit
        if site == "import":
            modules = sorted(
                {
                    alias.name
                    for node in ast.walk(tree.root)
                    if isinstance(node, ast.Import)
                    for alias in node.names
                    if catalog.has_module_prefix(alias.name)
                }
                | {
                    node.module
                    for node in ast.walk(tree.root)
                    if isinstance(node, ast.ImportFrom) and node.module and catalog.has_module_prefix(node.module)
                }
            )
            for module in modules:
                if module_sel != "*" and module != module_sel:
                    continue
                try:
                    current = t_api_obfuscate(current, _UsageRef(module, "*"), "dynamic_import")
                except TargetNotFound:
                    continue
            artifact = artifact.with_unit(current)
            continue
        # call sites: per-attack variant choice, rewritten right-to-left
        variant = step.params.get("variant") or rng.choice(pool)
        usages = resolve_api_calls(parse_unit(current), catalog)
        for usage in sorted(usages, key=lambda u: u.span, reverse=True):
            if module_sel != "*" and usage.module != module_sel:
                continue
            if api_sel != "*" and usage.api != api_sel:
                continue
            try:
                current = t_api_obfuscate(current, _UsageRef(usage.module, usage.api, usage.span), variant, catalog)
            except TargetNotFound:
                continue
        artifact = artifact.with_unit(current)
    return artifact


def apply_plan(artifact: PackageArtifact, plan: TransformationPlan,
               catalog: ApiCatalog | None = None) -> PackageArtifact:
    """Apply steps in order; every modified unit must re-parse.

    Untouched units stay byte-identical; a provenance trace is recorded on
    the returned artifact. Step failures surface as PlanError with the index.
    """
    from .behavior import default_catalog

    catalog = catalog or default_catalog()
    before = {u.relative_path: u.text for u in artifact.units}
    current = replace(
        artifact,
        source_units=list(artifact.source_units),
        file_inventory=list(artifact.file_inventory),
        provenance=list(artifact.provenance),
    )
    for index, step in enumerate(plan.steps):
        try:
            if step.transform in ("encode", "binary_array", "reorder"):
                current = _apply_data_obfuscation(current, step)
            elif step.transform == "rename":
                rng = random.Random(step.seed)
                for unit in _units_for(current, step.selector):
                    current = current.with_unit(t_rename(unit, catalog, rng))
            elif step.transform == "inject":
                rng = random.Random(step.seed)
                budget = int(step.params.get("budget", 0))
                for unit in _units_for(current, step.selector):
                    current = current.with_unit(t_inject(unit, budget, rng))
            elif step.transform == "api_obfuscate":
                current = _apply_api_obfuscation(current, step, catalog)
            else:
                raise PlanError(index, f"unknown transform {step.transform!r}")
        except PlanError:
            raise
        except Exception as exc:
            raise PlanError(index, f"{step.transform}: {exc}") from exc
        for unit in current.units:
            if unit.text != before.get(unit.relative_path) and not parse_unit(unit).parse_ok:
                raise PlanError(index, f"{unit.relative_path} no longer parses after {step.transform}")
        current.provenance.append({"step": index, "transform": step.transform, "seed": step.seed})
    return current
