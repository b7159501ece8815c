"""Syntax-tree facade over analyzed source units.

Parsing is total: grammatically invalid units degrade to a raw-fallback tree
where strings and identifiers are recovered lexically, so downstream features
never silently drop to zero on broken files (malicious archives often ship
them). API usages are resolved through per-unit, flow-insensitive alias
tracking; only literal arguments to ``__import__``/``getattr`` are followed,
computed names stay unresolvable.
"""

from __future__ import annotations

import ast
import keyword
import logging
import re
from dataclasses import dataclass, field

from .ingest import SourceUnit

logger = logging.getLogger(__name__)

Span = tuple[int, int, int, int]  # (lineno, col, end_lineno, end_col)


@dataclass
class SyntaxTree:
    unit_path: str
    root: ast.Module | None
    parse_ok: bool
    raw_fallback: bool
    text: str
    context: str  # "metadata" | "source"


@dataclass(frozen=True)
class StringLiteral:
    value: str
    span: Span
    context: str


@dataclass(frozen=True)
class Identifier:
    name: str
    span: Span
    role: str  # variable | function | class | import_alias | attribute


@dataclass(frozen=True)
class ApiUsage:
    module: str
    api: str
    span: Span
    category: str | None = None


def node_span(node: ast.AST) -> Span:
    return (
        getattr(node, "lineno", 0),
        getattr(node, "col_offset", 0),
        getattr(node, "end_lineno", getattr(node, "lineno", 0)),
        getattr(node, "end_col_offset", getattr(node, "col_offset", 0)),
    )


def parse_unit(unit: SourceUnit) -> SyntaxTree:
    """Parse a unit; never raises. Invalid source yields a raw-fallback tree."""
    try:
        root = ast.parse(unit.text)
        return SyntaxTree(unit.relative_path, root, True, False, unit.text, unit.kind)
    except (SyntaxError, ValueError, MemoryError, RecursionError):
        return SyntaxTree(unit.relative_path, None, False, True, unit.text, unit.kind)


# --- string literals ---

_RAW_STRING_RE = re.compile(
    r"""[rbufRBUF]{0,3}("{3}(?:[^"\\]|\\.|"(?!""))*"{3}|'{3}(?:[^'\\]|\\.|'(?!''))*'{3}"""
    r"""|"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')""",
    re.DOTALL,
)

_SIMPLE_ESCAPES = {"\\\\": "\\", "\\'": "'", '\\"': '"', "\\n": "\n", "\\t": "\t", "\\r": "\r"}


def _lexical_unescape(body: str) -> str:
    out = body
    for esc, plain in _SIMPLE_ESCAPES.items():
        out = out.replace(esc, plain)
    return out


def _lexical_strings(text: str, context: str) -> list[StringLiteral]:
    found = []
    line_starts = _line_starts(text)
    for m in _RAW_STRING_RE.finditer(text):
        token = m.group(1)
        quote = '"""' if token.startswith('"""') else "'''" if token.startswith("'''") else token[0]
        body = token[len(quote):-len(quote)]
        span = _offsets_to_span(line_starts, m.start(), m.end())
        found.append(StringLiteral(_lexical_unescape(body), span, context))
    return found


def _line_starts(text: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _offsets_to_span(line_starts: list[int], start: int, end: int) -> Span:
    import bisect

    sl = bisect.bisect_right(line_starts, start) - 1
    el = bisect.bisect_right(line_starts, end) - 1
    return (sl + 1, start - line_starts[sl], el + 1, end - line_starts[el])


class _StringVisitor(ast.NodeVisitor):
    def __init__(self, context: str):
        self.context = context
        self.found: list[StringLiteral] = []

    def visit_JoinedStr(self, node: ast.JoinedStr):
        for part in node.values:
            if isinstance(part, ast.Constant) and isinstance(part.value, str):
                self.found.append(StringLiteral(part.value, node_span(part), self.context))
            else:
                self.visit(part)

    def visit_Constant(self, node: ast.Constant):
        if isinstance(node.value, str):
            self.found.append(StringLiteral(node.value, node_span(node), self.context))


def extract_strings(tree: SyntaxTree) -> list[StringLiteral]:
    """All string literals in source order; lexical scan in raw-fallback mode.

    Adjacent implicitly concatenated literals surface as one value (the parser
    merges them); f-strings contribute only their literal segments.
    """
    if tree.raw_fallback or tree.root is None:
        return _lexical_strings(tree.text, tree.context)
    visitor = _StringVisitor(tree.context)
    visitor.visit(tree.root)
    visitor.found.sort(key=lambda s: s.span)
    return visitor.found


# --- identifiers ---

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _IdentifierVisitor(ast.NodeVisitor):
    def __init__(self):
        self.found: list[Identifier] = []

    def _add(self, name: str, span: Span, role: str):
        self.found.append(Identifier(name, span, role))

    def visit_Name(self, node: ast.Name):
        self._add(node.id, node_span(node), "variable")

    def visit_arg(self, node: ast.arg):
        self._add(node.arg, node_span(node), "variable")
        self.generic_visit(node)

    def visit_FunctionDef(self, node: ast.FunctionDef):
        self._add(node.name, node_span(node), "function")
        self.generic_visit(node)

    def visit_AsyncFunctionDef(self, node: ast.AsyncFunctionDef):
        self._add(node.name, node_span(node), "function")
        self.generic_visit(node)

    def visit_ClassDef(self, node: ast.ClassDef):
        self._add(node.name, node_span(node), "class")
        self.generic_visit(node)

    def visit_Attribute(self, node: ast.Attribute):
        self.generic_visit(node)
        self._add(node.attr, node_span(node), "attribute")

    def visit_Global(self, node: ast.Global):
        for name in node.names:
            self._add(name, node_span(node), "variable")

    def visit_Nonlocal(self, node: ast.Nonlocal):
        for name in node.names:
            self._add(name, node_span(node), "variable")

    def _alias_parts(self, node, alias: ast.alias, module: str | None):
        span = node_span(alias) if getattr(alias, "lineno", None) else node_span(node)
        if module:
            for part in module.split("."):
                self._add(part, node_span(node), "import_alias")
        for part in alias.name.split("."):
            self._add(part, span, "import_alias")
        if alias.asname:
            self._add(alias.asname, span, "import_alias")

    def visit_Import(self, node: ast.Import):
        for alias in node.names:
            self._alias_parts(node, alias, None)

    def visit_ImportFrom(self, node: ast.ImportFrom):
        for alias in node.names:
            self._alias_parts(node, alias, node.module)


def extract_identifiers(tree: SyntaxTree) -> list[Identifier]:
    """All binding and reference identifier occurrences, without deduplication.

    Attribute names are included. In raw-fallback mode, identifier-shaped
    tokens outside string literals are returned (keywords excluded).
    """
    if tree.raw_fallback or tree.root is None:
        masked = _RAW_STRING_RE.sub(lambda m: " " * len(m.group(0)), tree.text)
        line_starts = _line_starts(tree.text)
        out = []
        for m in _IDENT_RE.finditer(masked):
            name = m.group(0)
            if keyword.iskeyword(name):
                continue
            out.append(Identifier(name, _offsets_to_span(line_starts, m.start(), m.end()), "variable"))
        return out
    visitor = _IdentifierVisitor()
    visitor.visit(tree.root)
    return visitor.found


# --- security-sensitive API resolution ---


@dataclass
class _AliasEnv:
    modules: dict[str, str] = field(default_factory=dict)  # bound name -> dotted module path
    funcs: dict[str, tuple[str, str]] = field(default_factory=dict)  # bound name -> (module, api)
    instances: dict[str, str] = field(default_factory=dict)  # bound name -> catalog class-module
    assigned: set[str] = field(default_factory=set)


def _literal_str(node: ast.AST) -> str | None:
    if isinstance(node, ast.Constant) and isinstance(node.value, str):
        return node.value
    return None


class _ApiResolver(ast.NodeVisitor):
    """Single in-order pass; the alias environment updates as statements go by."""

    def __init__(self, catalog):
        self.catalog = catalog
        self.env = _AliasEnv()
        self.usages: list[ApiUsage] = []
        self._pyarmor = catalog.has_module("__pyarmor__")
        self._consumed: set[int] = set()  # inner call nodes already counted by an outer usage

    # -- value -> dotted module path (or None) --
    def _resolve_path(self, node: ast.AST) -> str | None:
        if isinstance(node, ast.Name):
            return self.env.modules.get(node.id)
        if isinstance(node, ast.Attribute):
            base = self._resolve_path(node.value)
            if base:
                return f"{base}.{node.attr}"
            return None
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "__import__":
            if node.args:
                name = _literal_str(node.args[0])
                if name is not None:
                    return name
        return None

    def _emit(self, module: str, api: str, span: Span):
        self.usages.append(ApiUsage(module, api, span))

    def _resolve_callable(self, func: ast.AST) -> tuple[str, str] | None:
        """Map a call's func expression to a catalog (module, api) pair."""
        # method.__call__(...) is the method itself
        if isinstance(func, ast.Attribute) and func.attr == "__call__":
            return self._resolve_callable(func.value)
        if isinstance(func, ast.Name):
            hit = self.env.funcs.get(func.id)
            if hit and self.catalog.has(*hit):
                return hit
            if (
                func.id not in self.env.assigned
                and func.id not in self.env.modules
                and func.id not in self.env.funcs
                and self.catalog.has("builtins", func.id)
            ):
                return ("builtins", func.id)
            return None
        if isinstance(func, ast.Attribute):
            path = self._resolve_path(func.value)
            if path is not None:
                if self.catalog.has(path, func.attr):
                    return (path, func.attr)
                return None
            if isinstance(func.value, ast.Name):
                cls = self.env.instances.get(func.value.id)
                if cls and self.catalog.has(cls, func.attr):
                    return (cls, func.attr)
            # instance produced inline: socket.socket(...).connect(...)
            if isinstance(func.value, ast.Call):
                inner = self._resolve_callable(func.value.func)
                if inner:
                    cls = f"{inner[0]}.{inner[1]}"
                    if self.catalog.has_module(cls) and self.catalog.has(cls, func.attr):
                        return (cls, func.attr)
            return None
        if isinstance(func, ast.Call):
            hit = self._resolve_getattr(func)
            if hit is not None:
                self._consumed.add(id(func))
            return hit
        return None

    def _resolve_getattr(self, call: ast.Call) -> tuple[str, str] | None:
        if not (isinstance(call.func, ast.Name) and call.func.id == "getattr"):
            return None
        if len(call.args) < 2:
            return None
        attr = _literal_str(call.args[1])
        if attr is None:
            return None
        path = self._resolve_path(call.args[0])
        if path is not None and self.catalog.has(path, attr):
            return (path, attr)
        if isinstance(call.args[0], ast.Name):
            cls = self.env.instances.get(call.args[0].id)
            if cls and self.catalog.has(cls, attr):
                return (cls, attr)
        return None

    # -- statements that bind names --
    def visit_Import(self, node: ast.Import):
        for alias in node.names:
            if alias.asname:
                self.env.modules[alias.asname] = alias.name
            else:
                top = alias.name.split(".")[0]
                self.env.modules[top] = top
            if alias.name == "__pyarmor__" and self._pyarmor:
                self._emit("__pyarmor__", "*", node_span(node))

    def visit_ImportFrom(self, node: ast.ImportFrom):
        module = node.module or ""
        for alias in node.names:
            bound = alias.asname or alias.name
            dotted = f"{module}.{alias.name}" if module else alias.name
            if self.catalog.has(module, alias.name):
                self.env.funcs[bound] = (module, alias.name)
            if self.catalog.has_module_prefix(dotted):
                self.env.modules[bound] = dotted
            if module == "__pyarmor__" and self._pyarmor:
                self._emit("__pyarmor__", "*", node_span(node))

    def visit_Assign(self, node: ast.Assign):
        self.visit(node.value)
        targets = [t for t in node.targets if isinstance(t, ast.Name)]
        if not targets:
            return
        value = node.value
        bound_path = self._resolve_path(value)
        resolved_func = None
        instance_of = None
        if isinstance(value, ast.Call):
            resolved_func = self._resolve_getattr(value)
            ctor = self._resolve_callable(value.func)
            if ctor:
                cls = f"{ctor[0]}.{ctor[1]}"
                if self.catalog.has_module(cls):
                    instance_of = cls
        for target in targets:
            name = target.id
            self.env.assigned.add(name)
            self.env.modules.pop(name, None)
            self.env.funcs.pop(name, None)
            self.env.instances.pop(name, None)
            if bound_path is not None:
                self.env.modules[name] = bound_path
            elif resolved_func is not None:
                self.env.funcs[name] = resolved_func
            elif instance_of is not None:
                self.env.instances[name] = instance_of

    def visit_Call(self, node: ast.Call):
        if id(node) not in self._consumed:
            hit = self._resolve_callable(node.func)
            if hit is None:
                hit = self._resolve_getattr(node)
            if hit is not None:
                self._emit(hit[0], hit[1], node_span(node))
        self.generic_visit(node)

    def visit_Name(self, node: ast.Name):
        if self._pyarmor and node.id == "__pyarmor__":
            self._emit("__pyarmor__", "*", node_span(node))


def resolve_api_calls(tree: SyntaxTree, catalog) -> list[ApiUsage]:
    """Resolved security-sensitive API usages in span order.

    Unresolvable calls are omitted. Raw-fallback trees resolve nothing (the
    lexical layer carries no alias information).
    """
    if tree.raw_fallback or tree.root is None:
        return []
    resolver = _ApiResolver(catalog)
    resolver.visit(tree.root)
    resolver.usages.sort(key=lambda u: u.span)
    return resolver.usages
