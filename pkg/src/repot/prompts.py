"""Prompt templates: problem statements, output contracts and the repair prompt.

The repair prompt is split at a literal marker line. Everything above it
depends only on the instance, so it is byte-identical across repair calls and
can be prefix-cached; everything below describes the current checkpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .envs import get_env

CHECKPOINT_MARKER = "--- verifier checkpoint below ---"

POT_CONTRACT = (
    "Write a Python program that solves the puzzle. Put it in a single ```python code block.\n"
    "When run, the program must print exactly one line of the form:\n"
    "moves = [action, action, ...]\n"
    "listing every move from the initial state to the goal in the action format above."
)

COT_CONTRACT = (
    "Think through the solution step by step. End your answer with exactly one line of the form:\n"
    "moves = [action, action, ...]\n"
    "listing every move from the initial state to the goal in the action format above."
)


def problem_statement(env: str, initial: Any, goal: Any) -> str:
    e = get_env(env)
    return (
        f"Puzzle: {e.title}\n"
        f"Rules:\n{e.rules}\n"
        f"Action format: {e.action_format}\n"
        f"Initial state: {e.render_state(initial)}\n"
        f"Goal state: {e.render_goal(goal)}"
    )


def render_prompt(instance: Any, mode: str = "pot") -> str:
    """Full first-call prompt: the instance's problem statement plus an output contract."""
    if mode not in ("pot", "cot"):
        raise ValueError(f"mode must be 'pot' or 'cot', got {mode!r}")
    contract = POT_CONTRACT if mode == "pot" else COT_CONTRACT
    return f"{instance.natural_language_prompt}\n\n{contract}\n"


def format_moves(actions: Sequence[Any]) -> str:
    return "[" + ", ".join(str(a) for a in actions) + "]"


@dataclass(frozen=True)
class CheckpointView:
    """What the repair call is told about the verified boundary."""

    prefix_tail: tuple[str, ...]
    prefix_len: int
    boundary_state_text: str
    legal_actions_text: str
    blocked_text: str
    error_text: str


def blocked_actions(env: str, state: Any, failed_action: Any, cap: int = 5) -> list[str]:
    """Illegal actions sharing the failed action's operator, in canonical order."""
    if failed_action is None or isinstance(failed_action, str):
        return []
    e = get_env(env)
    op = str(failed_action).split("(", 1)[0]
    legal = {str(a) for a in e.legal_actions(state)}
    out = [str(failed_action)]
    for a in e.action_universe(state):
        text = str(a)
        if len(out) >= cap:
            break
        if text.split("(", 1)[0] == op and text not in legal and text not in out:
            out.append(text)
    return out[:cap]


def make_view(env: str, prefix: Sequence[Any], state: Any, error: str, failed_action: Any = None, T: int = 4) -> CheckpointView:
    e = get_env(env)
    tail = tuple(str(a) for a in prefix[max(0, len(prefix) - T) :]) if T > 0 else ()
    return CheckpointView(
        prefix_tail=tail,
        prefix_len=len(prefix),
        boundary_state_text=e.render_state(state),
        legal_actions_text=format_moves(e.legal_actions(state)),
        blocked_text="[" + ", ".join(blocked_actions(env, state, failed_action)) + "]",
        error_text=error or "none",
    )


def repair_stable_block(instance: Any, max_moves: int | None = None, from_start: bool = False) -> str:
    e = get_env(instance.environment)
    bound = f"up to {max_moves} " if max_moves else ""
    origin = "from the initial state" if from_start else "from the current verified state"
    return (
        f"{instance.natural_language_prompt}\n"
        f"Goal state: {e.render_goal(instance.goal)}\n"
        "Write Python code that prints exactly one line:\n"
        "  moves = [...]\n"
        f"containing {bound}primitive moves to apply\n"
        f"{origin}.\n"
        f"{CHECKPOINT_MARKER}\n"
    )


def build_repair_prompt(
    instance: Any,
    view: CheckpointView,
    *,
    max_moves: int | None = None,
    hide_prefix: bool = False,
    from_start: bool = False,
) -> str:
    """Stable block, marker line, then the checkpoint fields.

    ``hide_prefix`` drops the executed-move count and the recent-move tail.
    ``from_start`` asks for a complete plan from the initial state while still
    showing the checkpoint.
    """
    lines = []
    if not hide_prefix:
        lines.append(f"You have already executed {view.prefix_len} verified moves.")
        lines.append(f"Recent verified moves: [{', '.join(view.prefix_tail)}]")
    lines += [
        f"Current verified state: {view.boundary_state_text}",
        f"Legal moves: {view.legal_actions_text}",
        f"Blocked: {view.blocked_text}",
        f"Verifier message: {view.error_text}",
    ]
    return repair_stable_block(instance, max_moves, from_start) + "\n".join(lines) + "\n"


def repair_max_moves(instance: Any, override: int | None = None) -> int | None:
    """Move cap K shown in the repair contract: twice the oracle length unless overridden."""
    if override is not None:
        return override
    n = getattr(instance, "oracle_plan_length", 0) or 0
    return 2 * n if n > 0 else None
