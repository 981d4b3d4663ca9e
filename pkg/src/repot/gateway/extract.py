"""Pull a plan out of a raw completion.

In ``pot`` mode the first fenced code block is executed and the last
``moves = [...]`` line it prints is parsed. Without a code block the completion
text itself is scanned. ``cot`` mode scans the text only. The executor is
injectable, so extraction can be tested without a sandbox.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from ..envs import ActionParseError, get_env
from ..envs.base import split_list
from .sandbox import SandboxLimits, SandboxResult, execute_program

_FENCE = re.compile(r"```[ \t]*([A-Za-z0-9_+-]*)[^\n]*\n(.*?)```", re.S)
_MOVES = re.compile(r"^\s*moves\s*=\s*(\[.*\])\s*$")

Executor = Callable[[str], SandboxResult]


class ExtractionError(ValueError):
    """No plan could be recovered. ``index`` is set for element parse failures (0-based)."""

    def __init__(self, message: str, index: int | None = None) -> None:
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Extraction:
    plan: list
    source: str  # "program", "text"
    sandbox: SandboxResult | None = None


def first_code_block(text: str) -> str | None:
    m = _FENCE.search(text)
    return m.group(2) if m else None


def last_moves_line(text: str) -> str | None:
    """Bracketed list from the last ``moves = [...]`` line, or ``None``."""
    found = None
    for line in text.splitlines():
        m = _MOVES.match(line)
        if m:
            found = m.group(1)
    return found


def _strip_quotes(item: str) -> str:
    item = item.strip()
    if len(item) >= 2 and item[0] == item[-1] and item[0] in "'\"":
        return item[1:-1].strip()
    return item


def parse_moves(env: str, bracketed: str) -> list:
    e = get_env(env)
    inner = bracketed.strip()[1:-1]
    if not inner.strip():
        return []
    plan = []
    for i, item in enumerate(split_list(inner)):
        try:
            plan.append(e.parse_action(_strip_quotes(item)))
        except ActionParseError as exc:
            raise ExtractionError(f"element {i} could not be parsed: {exc}", index=i) from None
    return plan


def extract_plan(
    env: str,
    completion: str,
    mode: str = "pot",
    *,
    executor: Executor | None = None,
    limits: SandboxLimits | None = None,
) -> Extraction:
    if mode not in ("pot", "cot"):
        raise ValueError(f"mode must be 'pot' or 'cot', got {mode!r}")
    get_env(env)
    if mode == "pot":
        code = first_code_block(completion)
        if code is not None:
            run = executor or (lambda c: execute_program(c, limits))
            result = run(code)
            if result.timed_out:
                raise ExtractionError("sandbox timeout")
            line = last_moves_line(result.stdout)
            if line is None:
                raise ExtractionError("no plan")
            return Extraction(parse_moves(env, line), "program", result)
    line = last_moves_line(completion)
    if line is None:
        raise ExtractionError("no plan")
    return Extraction(parse_moves(env, line), "text")
