"""Model backends, sandboxed program execution and plan extraction."""

from __future__ import annotations

from .backends import (
    Backend,
    CompletionRequest,
    CompletionResult,
    RemoteBackend,
    RemoteConfig,
    ScriptedBackend,
    complete,
    whitespace_tokens,
)
from .extract import Extraction, ExtractionError, extract_plan, last_moves_line, parse_moves
from .sandbox import Sandbox, SandboxConfigError, SandboxLimits, SandboxResult, execute_program

__all__ = [
    "Backend",
    "CompletionRequest",
    "CompletionResult",
    "Extraction",
    "ExtractionError",
    "RemoteBackend",
    "RemoteConfig",
    "Sandbox",
    "SandboxConfigError",
    "SandboxLimits",
    "SandboxResult",
    "ScriptedBackend",
    "complete",
    "execute_program",
    "extract_plan",
    "last_moves_line",
    "parse_moves",
    "whitespace_tokens",
]
