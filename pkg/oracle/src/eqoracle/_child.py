"""Runs one snippet inside this (disposable) interpreter with stubs installed.

Reads a JSON request on stdin: {"source": str, "stubs": [[module, api], ...]}
and prints a JSON result: {"ok": bool, "trace": [[name, args], ...],
"stdout": str, "error": str}.

Every stubbed API is replaced with a recorder that never touches the real
implementation; an audit hook aborts the run if any sensitive operation
(process spawn, network connect, non-sandbox write) slips past the stubs.
"""

from __future__ import annotations

import io
import json
import sys
import types

_TRACE: list[list[str]] = []

_BLOCKED_EVENTS = (
    "os.system",
    "os.exec",
    "os.spawn",
    "os.posix_spawn",
    "os.fork",
    "os.forkpty",
    "subprocess.Popen",
    "socket.connect",
    "socket.bind",
    "socket.sendto",
    "socket.getaddrinfo",
    "socket.gethostbyname",
    "urllib.Request",
    "ftplib.connect",
    "smtplib.connect",
)


class UnstubbedSensitiveCall(RuntimeError):
    pass


def _audit(event, args):
    if event in _BLOCKED_EVENTS:
        raise UnstubbedSensitiveCall(f"unstubbed sensitive call: {event}")
    if event == "open":
        path, mode = str(args[0]), str(args[1] or "r")
        if any(flag in mode for flag in ("w", "a", "x", "+")) and not path.startswith("/tmp/eqoracle-"):
            raise UnstubbedSensitiveCall(f"unstubbed write: open({path!r}, {mode!r})")


def _render_args(args, kwargs) -> str:
    parts = [repr(a) for a in args]
    parts += [f"{k}={kwargs[k]!r}" for k in sorted(kwargs)]
    return ", ".join(parts)


class StubResult:
    """Inert value returned by stubs; quietly absorbs common follow-up usage."""

    def __init__(self, name: str):
        self._name = name

    def __getattr__(self, attr):
        if attr.startswith("__") and attr not in ("__call__",):
            raise AttributeError(attr)
        return _recorder(f"{self._name}.{attr}", record=False)

    def __call__(self, *args, **kwargs):
        return self

    def __iter__(self):
        return iter(())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def __str__(self):
        return f"<stub {self._name}>"

    __repr__ = __str__


class StubFile:
    """Deterministic stand-in for opened files."""

    _CONTENT = "stub-line-1\nstub-line-2\n"

    def __init__(self):
        self._buffer = io.StringIO(self._CONTENT)

    def read(self, *a):
        return self._buffer.read(*a)

    def readline(self):
        return self._buffer.readline()

    def readlines(self):
        return self._buffer.readlines()

    def write(self, data):
        return len(data)

    def writelines(self, lines):
        return None

    def close(self):
        return None

    def __iter__(self):
        return iter(self._CONTENT.splitlines(keepends=True))

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _recorder(name: str, record: bool = True, result_factory=None):
    def stub(*args, **kwargs):
        if record:
            _TRACE.append([name, _render_args(args, kwargs)])
        if result_factory is not None:
            return result_factory()
        return StubResult(name)

    stub.__name__ = name.rsplit(".", 1)[-1]
    stub.__qualname__ = name
    return stub


def _synthesize_module(dotted: str) -> types.ModuleType:
    parts = dotted.split(".")
    parent = None
    for i in range(1, len(parts) + 1):
        prefix = ".".join(parts[:i])
        module = sys.modules.get(prefix)
        if module is None:
            module = types.ModuleType(prefix)
            sys.modules[prefix] = module
            if parent is not None:
                setattr(parent, parts[i - 1], module)
        parent = module
    return sys.modules[dotted]


def _class_factory(dotted: str, methods: tuple[str, ...]):
    def factory(*args, **kwargs):
        _TRACE.append([dotted, _render_args(args, kwargs)])
        instance = StubResult(dotted)
        for method in methods:
            object.__setattr__(instance, method, _recorder(f"{dotted}.{method}"))
        return instance

    return factory


class _LazyStubber:
    """Patches stub recorders onto modules as the snippet imports them.

    Modules never imported by the snippet are never touched (or loaded),
    which keeps per-snippet cost at interpreter startup plus the snippet's
    own imports. Missing third-party modules are synthesized so stub-only
    usage still runs.
    """

    def __init__(self, stubs: list[tuple[str, str]]):
        self.by_module: dict[str, list[str]] = {}
        for module, api in stubs:
            self.by_module.setdefault(module, []).append(api)
        self.pending_tops: dict[str, list[str]] = {}
        for dotted in self.by_module:
            if dotted != "builtins":
                self.pending_tops.setdefault(dotted.split(".")[0], []).append(dotted)
        self.patched: set[str] = set()
        self.real_import = __import__

    def wrapped_import(self, name, globals=None, locals=None, fromlist=(), level=0):
        try:
            module = self.real_import(name, globals, locals, fromlist, level)
        except ImportError:
            if level == 0 and name.split(".")[0] in self.pending_tops:
                self._materialize_synthetic(name)
                module = self.real_import(name, globals, locals, fromlist, level)
            else:
                raise
        top = name.split(".")[0] if level == 0 else ""
        # plain modules first so a class factory (socket.socket) wins over a
        # same-named function entry on the parent module
        for dotted in sorted(self.pending_tops.get(top, []), key=lambda d: d.count(".")):
            self._patch(dotted)
        return module

    def _materialize_synthetic(self, name):
        for dotted in self.pending_tops.get(name.split(".")[0], []):
            head = dotted
            # class-module entries synthesize their parent module
            if "." in dotted and dotted not in (name, name.split(".")[0]):
                head, _, _ = dotted.rpartition(".")
            _synthesize_module(head if head else dotted)
        if name not in sys.modules:
            _synthesize_module(name)

    def _patch(self, dotted: str):
        if dotted in self.patched:
            return
        apis = tuple(self.by_module[dotted])
        module = sys.modules.get(dotted)
        if module is not None:
            for api in apis:
                setattr(module, api, _recorder(f"{dotted}.{api}"))
            self.patched.add(dotted)
            return
        head, _, tail = dotted.rpartition(".")
        head_mod = sys.modules.get(head)
        if head_mod is None:
            return  # parent not imported yet; a later import triggers us again
        current = getattr(head_mod, tail, None)
        if isinstance(current, types.ModuleType):
            for api in apis:
                setattr(current, api, _recorder(f"{dotted}.{api}"))
        else:
            setattr(head_mod, tail, _class_factory(dotted, apis))
        self.patched.add(dotted)


def _install_stubs(stubs: list[tuple[str, str]], exec_builtins: dict) -> None:
    stubber = _LazyStubber(stubs)
    for api in stubber.by_module.get("builtins", []):
        if api == "open":
            exec_builtins[api] = _recorder("builtins.open", result_factory=StubFile)
        else:
            exec_builtins[api] = _recorder(f"builtins.{api}")
    exec_builtins["__import__"] = stubber.wrapped_import


def main() -> int:
    request = json.loads(sys.stdin.read())
    source = request["source"]
    stubs = [tuple(s) for s in request.get("stubs", [])]

    import builtins as _builtins

    exec_builtins = {k: getattr(_builtins, k) for k in dir(_builtins)}
    _install_stubs(stubs, exec_builtins)
    sys.addaudithook(_audit)

    captured = io.StringIO()
    real_stdout = sys.stdout
    sys.stdout = captured
    ok, error = True, ""
    try:
        code = compile(source, "<snippet>", "exec")
        exec(code, {"__name__": "__main__", "__builtins__": exec_builtins})
    except UnstubbedSensitiveCall as exc:
        ok, error = False, f"unstubbed:{exc}"
    except BaseException as exc:  # snippet errors are data, not oracle bugs
        ok, error = False, f"{type(exc).__name__}: {exc}"
    finally:
        sys.stdout = real_stdout

    print(json.dumps({"ok": ok, "trace": _TRACE, "stdout": captured.getvalue(), "error": error}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
