"""Verified replay: walk a candidate plan to its first invalid transition.

Replay touches only the environment layer; it never talks to a model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .envs import ActionParseError, Environment, get_env


@dataclass(frozen=True)
class ReplayOutcome:
    """Result of replaying ``plan`` from a start state.

    ``failure_index`` is 1-based: the index of the first invalid action, or
    ``len(plan) + 1`` when every action is valid. ``prefix`` holds the
    verified actions before it and ``boundary_state`` the state they reach.
    """

    prefix: tuple
    boundary_state: Any
    failure_index: int
    error: str
    goal_reached: bool
    plan_len: int
    failed_action: Any = None

    @property
    def fully_valid(self) -> bool:
        return self.failure_index == self.plan_len + 1

    @property
    def prefix_fraction(self) -> float | None:
        """Verified fraction ``(k - 1) / n``; ``None`` for an empty plan."""
        if self.plan_len == 0:
            return None
        return len(self.prefix) / self.plan_len


def replay(env: str | Environment, start: Any, plan: Sequence[Any], goal: Any = None) -> ReplayOutcome:
    """Replay ``plan`` from ``start`` and stop at the first invalid action.

    Plan items may be actions or raw text. Text that does not parse counts as
    an invalid transition whose error is the parse message. With ``goal=None``
    ``goal_reached`` is always False.
    """
    e = get_env(env)
    state = start
    prefix = []
    n = len(plan)
    for i, item in enumerate(plan):
        action = item
        if isinstance(item, str):
            try:
                action = e.parse_action(item)
            except ActionParseError as exc:
                return _done(e, prefix, state, i + 1, f"could not parse {item!r}: {exc}", goal, n, item)
        result = e.step(state, action)
        if not result.valid:
            return _done(e, prefix, state, i + 1, result.error, goal, n, action)
        state = result.next_state
        prefix.append(action)
    return _done(e, prefix, state, n + 1, "", goal, n, None)


def _done(e, prefix, state, k, error, goal, n, failed) -> ReplayOutcome:
    reached = goal is not None and e.is_goal(state, goal)
    return ReplayOutcome(tuple(prefix), state, k, error, reached, n, failed)
