"""The four planning environments behind one interface.

Module-level functions dispatch on the ``env`` tag carried by every state,
action and goal value.
"""

from __future__ import annotations

from typing import Any, Union

from .base import (
    ActionParseError,
    EnvMismatchError,
    Environment,
    InvalidStateError,
    StepResult,
)
from .blocksworld import BLOCKSWORLD, BlocksAction, BlocksGoal, BlocksState
from .checker import CHECKER, CheckerState, Jump, Slide
from .hanoi import HANOI, HanoiState, Move
from .river import RIVER, Cross, RiverState

ENV_IDS = ("hanoi", "checker", "river", "blocksworld")
ENVIRONMENTS: dict[str, Environment] = {e.name: e for e in (HANOI, CHECKER, RIVER, BLOCKSWORLD)}

EnvState = Union[HanoiState, CheckerState, RiverState, BlocksState]
Action = Union[Move, Slide, Jump, Cross, BlocksAction]
Goal = Union[EnvState, BlocksGoal]


def get_env(env: str | Environment | Any) -> Environment:
    """Resolve an environment id, an Environment, or any env-tagged value."""
    if isinstance(env, Environment):
        return env
    key = env if isinstance(env, str) else getattr(env, "env", None)
    try:
        return ENVIRONMENTS[key]
    except KeyError:
        raise ValueError(f"unknown environment {key!r}; expected one of {', '.join(ENV_IDS)}") from None


def step(state: EnvState, action: Action) -> StepResult:
    return get_env(state).step(state, action)


def is_goal(state: EnvState, goal: Goal) -> bool:
    return get_env(state).is_goal(state, goal)


def legal_actions(state: EnvState) -> list:
    return get_env(state).legal_actions(state)


def normalize(state: EnvState) -> EnvState:
    return get_env(state).normalize(state)


def parse_action(env: str, text: str) -> Action:
    return get_env(env).parse_action(text)


def render_state(state: EnvState) -> str:
    return get_env(state).render_state(state)


__all__ = [
    "ENV_IDS",
    "ENVIRONMENTS",
    "ActionParseError",
    "BlocksAction",
    "BlocksGoal",
    "BlocksState",
    "CheckerState",
    "Cross",
    "EnvMismatchError",
    "Environment",
    "InvalidStateError",
    "HanoiState",
    "Jump",
    "Move",
    "RiverState",
    "Slide",
    "StepResult",
    "get_env",
    "is_goal",
    "legal_actions",
    "normalize",
    "parse_action",
    "render_state",
    "step",
]
