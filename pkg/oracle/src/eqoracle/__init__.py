"""Instrumented sandbox that verdicts behavioral equivalence of snippet pairs."""

from .sandbox import SandboxSetupFailure, TracePair, check_equivalence, run_snippet

__version__ = "0.1.0"
__all__ = ["check_equivalence", "run_snippet", "TracePair", "SandboxSetupFailure"]
