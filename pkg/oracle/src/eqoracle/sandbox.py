"""Snippet-pair execution and trace comparison."""

from __future__ import annotations

import json
import re
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

DEFAULT_TIMEOUT = 5.0

# run the child by file path: skips importing this package in the child,
# which meaningfully cuts per-snippet startup cost
_CHILD = str(Path(__file__).with_name("_child.py"))

# identifiers minted by source transformations: underscore + 8..12 lowercase
_FRESH_NAME_RE = re.compile(r"\b_[a-z]{8,12}\b")

# fallback manifest for standalone use; callers normally send the full
# catalog-derived list with the request
DEFAULT_STUBS: list[tuple[str, str]] = [
    ("os", "system"),
    ("os", "popen"),
    ("subprocess", "run"),
    ("subprocess", "call"),
    ("subprocess", "Popen"),
    ("subprocess", "check_output"),
    ("requests", "get"),
    ("requests", "post"),
    ("socket", "create_connection"),
    ("socket.socket", "connect"),
    ("urllib.request", "urlopen"),
    ("urllib.request", "urlretrieve"),
    ("builtins", "open"),
    ("builtins", "exec"),
    ("builtins", "eval"),
]


class SandboxSetupFailure(RuntimeError):
    pass


@dataclass
class SnippetRun:
    ok: bool
    trace: list[list[str]]
    stdout: str
    error: str = ""
    timed_out: bool = False


@dataclass
class TracePair:
    original_trace: list[list[str]]
    transformed_trace: list[list[str]]
    original_stdout: str
    transformed_stdout: str
    verdict: str  # equivalent | divergent | crashed
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "original_trace": self.original_trace,
            "transformed_trace": self.transformed_trace,
            "original_stdout": self.original_stdout,
            "transformed_stdout": self.transformed_stdout,
            "verdict": self.verdict,
            "detail": self.detail,
        }


def run_snippet(source: str, stubs: list[tuple[str, str]], timeout: float = DEFAULT_TIMEOUT) -> SnippetRun:
    """Execute one snippet in an isolated interpreter with stubs installed."""
    request = json.dumps({"source": source, "stubs": [list(s) for s in stubs]})
    try:
        proc = subprocess.run(
            [sys.executable, _CHILD],
            input=request.encode(),
            capture_output=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return SnippetRun(False, [], "", "timeout", timed_out=True)
    except OSError as exc:
        raise SandboxSetupFailure(str(exc)) from exc
    if proc.returncode != 0:
        raise SandboxSetupFailure(proc.stderr.decode(errors="replace")[:500])
    try:
        payload = json.loads(proc.stdout.decode())
    except json.JSONDecodeError as exc:
        raise SandboxSetupFailure(f"child produced no result: {exc}") from exc
    return SnippetRun(payload["ok"], payload["trace"], payload["stdout"], payload.get("error", ""))


def _normalize(trace: list[list[str]]) -> list[list[str]]:
    return [[name, _FRESH_NAME_RE.sub("_FRESH", args)] for name, args in trace]


def check_equivalence(original: str, transformed: str,
                      stubs: list[tuple[str, str]] | None = None,
                      timeout: float = DEFAULT_TIMEOUT) -> TracePair:
    """Execute both snippets with stubs and verdict their observable behavior.

    equivalent: identical normalized traces and stdout; divergent: both ran
    but differ; crashed: either side failed, timed out, or hit an unstubbed
    sensitive call.
    """
    stubs = stubs if stubs is not None else DEFAULT_STUBS
    first = run_snippet(original, stubs, timeout)
    second = run_snippet(transformed, stubs, timeout)
    pair = TracePair(first.trace, second.trace, first.stdout, second.stdout, "crashed")
    if not first.ok or not second.ok:
        pair.detail = first.error or second.error
        return pair
    if _normalize(first.trace) == _normalize(second.trace) and first.stdout == second.stdout:
        pair.verdict = "equivalent"
    else:
        pair.verdict = "divergent"
        for a, b in zip(_normalize(first.trace), _normalize(second.trace)):
            if a != b:
                pair.detail = f"first differing call: {a} != {b}"
                break
        else:
            pair.detail = "trace length or stdout differs"
    return pair
