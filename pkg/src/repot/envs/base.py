"""Shared pieces of the environment interface: step results, errors, action-call parsing."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any


class EnvMismatchError(ValueError):
    """A state, action or goal from one environment was handed to another."""


class InvalidStateError(ValueError):
    """A state violates the invariants of its environment."""


class ActionParseError(ValueError):
    """Text could not be parsed as an action.

    ``position`` is the character offset where parsing failed and ``expected``
    a short hint of what was expected there.
    """

    def __init__(self, message: str, position: int = 0, expected: str = "") -> None:
        super().__init__(message)
        self.message = message
        self.position = position
        self.expected = expected

    def __str__(self) -> str:
        hint = f"; expected {self.expected}" if self.expected else ""
        return f"{self.message} (at position {self.position}{hint})"


@dataclass(frozen=True, slots=True)
class StepResult:
    next_state: Any
    valid: bool
    error: str = ""


def ok(state: Any) -> StepResult:
    return StepResult(state, True, "")


def fail(state: Any, error: str) -> StepResult:
    return StepResult(state, False, error)


_CALL_HEAD = re.compile(r"\s*([A-Za-z][A-Za-z0-9_-]*)\s*\(")


def split_call(text: str) -> tuple[str, list[tuple[str, int]], int]:
    """Split ``name(arg, arg, ...)`` into a lower-cased name and stripped args.

    Returns ``(name, [(arg, offset), ...], close_offset)``. Square brackets nest,
    so ``cross(right, [a, b])`` yields two args.
    """
    m = _CALL_HEAD.match(text)
    if m is None:
        stripped = len(text) - len(text.lstrip())
        raise ActionParseError(f"not an action: {text.strip()!r}", stripped, "name(args)")
    name = m.group(1).lower()
    args: list[tuple[str, int]] = []
    depth = 0
    start = m.end()
    close = -1
    for i in range(m.end(), len(text)):
        ch = text[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ActionParseError("unbalanced ']'", i, "','  or ')'")
        elif ch == "," and depth == 0:
            args.append((text[start:i], start))
            start = i + 1
        elif ch == ")" and depth == 0:
            args.append((text[start:i], start))
            close = i
            break
    if close < 0:
        raise ActionParseError("missing closing ')'", len(text), "')'")
    if text[close + 1 :].strip():
        raise ActionParseError("trailing text after action", close + 1, "end of action")
    cleaned = []
    for raw, off in args:
        lead = len(raw) - len(raw.lstrip())
        cleaned.append((raw.strip(), off + lead))
    if len(cleaned) == 1 and cleaned[0][0] == "":
        cleaned = []
    return name, cleaned, close


def expect_arity(name: str, args: list, arity: int, close: int) -> None:
    if len(args) != arity:
        raise ActionParseError(
            f"{name} takes {arity} argument{'s' if arity != 1 else ''}, got {len(args)}",
            close,
            f"{arity} arguments",
        )


def parse_int(arg: tuple[str, int], what: str) -> int:
    text, off = arg
    if not re.fullmatch(r"[+-]?\d+", text):
        raise ActionParseError(f"{what} must be an integer, got {text!r}", off, "integer")
    return int(text)


_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9_-]*")


def parse_name(arg: tuple[str, int], what: str) -> str:
    text, off = arg
    if not _NAME.fullmatch(text):
        raise ActionParseError(f"{what} must be an identifier, got {text!r}", off, "identifier")
    return text.lower()


def split_list(text: str) -> list[str]:
    """Split a comma separated list at bracket/paren depth 0."""
    out: list[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(text[start:i].strip())
            start = i + 1
    tail = text[start:].strip()
    if tail or out:
        out.append(tail)
    return out


class Environment:
    """Uniform interface over one deterministic planning domain.

    Subclasses implement the domain rules. States, actions and goals are
    immutable values tagged with ``env``; every method is pure.
    """

    name: str = ""
    title: str = ""
    rules: str = ""
    action_format: str = ""

    # -- core transition system -------------------------------------------------
    def step(self, state: Any, action: Any) -> StepResult:
        raise NotImplementedError

    def is_goal(self, state: Any, goal: Any) -> bool:
        self.check_env(state, goal)
        return self.normalize(state) == self.normalize(goal)

    def legal_actions(self, state: Any) -> list:
        raise NotImplementedError

    def normalize(self, state: Any) -> Any:
        return state

    def validate_state(self, state: Any) -> None:
        raise NotImplementedError

    def complexity(self, state: Any) -> int:
        raise NotImplementedError

    def action_universe(self, state: Any) -> list:
        """Every syntactically well-formed action over the objects of ``state``."""
        raise NotImplementedError

    # -- text ---------------------------------------------------------------------
    def parse_action(self, text: str) -> Any:
        raise NotImplementedError

    def format_action(self, action: Any) -> str:
        self.check_env(action)
        return str(action)

    def render_state(self, state: Any) -> str:
        raise NotImplementedError

    def render_goal(self, goal: Any) -> str:
        return self.render_state(goal)

    # -- serialization ------------------------------------------------------------
    def state_to_json(self, state: Any) -> Any:
        raise NotImplementedError

    def state_from_json(self, data: Any) -> Any:
        raise NotImplementedError

    def goal_to_json(self, goal: Any) -> Any:
        return self.state_to_json(goal)

    def goal_from_json(self, data: Any) -> Any:
        return self.state_from_json(data)

    # -- helpers ------------------------------------------------------------------
    def check_env(self, *values: Any) -> None:
        for v in values:
            tag = getattr(v, "env", None)
            if tag != self.name:
                raise EnvMismatchError(
                    f"{type(v).__name__} belongs to {tag!r}, not {self.name!r}"
                )

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name!r}>"
