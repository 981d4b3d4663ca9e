"""River Crossing with actor/agent pairs and a two-seat boat.

An actor may never be on a bank or in the boat together with another pair's
agent unless the actor's own agent is also there.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import ClassVar

from .base import (
    ActionParseError,
    Environment,
    InvalidStateError,
    StepResult,
    expect_arity,
    fail,
    ok,
    split_call,
    split_list,
)

BOAT_CAPACITY = 2
SIDES = ("left", "right")
_ENTITY = re.compile(r"(actor|agent)_(\d+)")


def entity_key(name: str) -> tuple[int, int]:
    m = _ENTITY.fullmatch(name)
    if m is None:
        return (10**9, 0)
    return (int(m.group(2)), 0 if m.group(1) == "actor" else 1)


def entities(n_pairs: int) -> tuple[str, ...]:
    out = []
    for i in range(1, n_pairs + 1):
        out += [f"actor_{i}", f"agent_{i}"]
    return tuple(out)


def unsafe_pair(group) -> tuple[str, str] | None:
    """First ``(actor, foreign_agent)`` violating the safety rule within ``group``."""
    members = set(group)
    agents = sorted((e for e in members if e.startswith("agent_")), key=entity_key)
    if not agents:
        return None
    for actor in sorted((e for e in members if e.startswith("actor_")), key=entity_key):
        own = "agent_" + actor.split("_", 1)[1]
        if own in members:
            continue
        for agent in agents:
            if agent != own:
                return actor, agent
    return None


@dataclass(frozen=True, slots=True)
class RiverState:
    n_pairs: int
    left: tuple[str, ...]
    right: tuple[str, ...]
    boat: str
    env: ClassVar[str] = "river"

    @classmethod
    def all_on(cls, n_pairs: int, side: str) -> RiverState:
        everyone = entities(n_pairs)
        if side == "left":
            return cls(n_pairs, everyone, (), "left")
        return cls(n_pairs, (), everyone, "right")

    def bank(self, side: str) -> tuple[str, ...]:
        return self.left if side == "left" else self.right


@dataclass(frozen=True, slots=True)
class Cross:
    direction: str
    passengers: tuple[str, ...] = field(default=())
    env: ClassVar[str] = "river"

    def __post_init__(self) -> None:
        object.__setattr__(self, "passengers", tuple(sorted(self.passengers, key=entity_key)))

    def __str__(self) -> str:
        return f"cross({self.direction},[{','.join(self.passengers)}])"


class River(Environment):
    name = "river"
    title = "River Crossing"
    rules = (
        "N actor/agent pairs (actor_i, agent_i) and a boat start on the banks shown; everyone must reach the right bank.\n"
        "- The boat holds 1 or 2 people and cannot cross empty; it crosses to the opposite bank each time.\n"
        "- An actor may never be with another pair's agent (on a bank or in the boat) unless the actor's own agent is also present."
    )
    action_format = "cross(direction, [passenger, ...]) where direction is the destination bank, e.g. cross(right,[actor_1,agent_1])"

    def step(self, state: RiverState, action: Cross) -> StepResult:
        self.check_env(state, action)
        if action.direction not in SIDES:
            return fail(state, f"unknown direction {action.direction!r} (use left or right)")
        if action.direction == state.boat:
            return fail(state, f"the boat is already on the {state.boat} bank")
        people = action.passengers
        if not 1 <= len(people) <= BOAT_CAPACITY:
            return fail(state, f"the boat carries 1 or {BOAT_CAPACITY} passengers, got {len(people)}")
        if len(set(people)) != len(people):
            return fail(state, "a passenger is listed twice")
        known = set(state.left) | set(state.right)
        origin = state.bank(state.boat)
        for p in people:
            if p not in known:
                return fail(state, f"unknown passenger {p}")
            if p not in origin:
                return fail(state, f"{p} is not on the {state.boat} bank with the boat")
        bad = unsafe_pair(people)
        if bad:
            return fail(state, f"{bad[0]} cannot share the boat with {bad[1]} without agent_{bad[0].split('_')[1]}")
        stay = tuple(e for e in origin if e not in people)
        dest = state.bank(action.direction) + people
        for side, group in ((state.boat, stay), (action.direction, dest)):
            bad = unsafe_pair(group)
            if bad:
                return fail(
                    state,
                    f"{bad[0]} would be with {bad[1]} on the {side} bank without agent_{bad[0].split('_')[1]}",
                )
        if state.boat == "left":
            nxt = RiverState(state.n_pairs, stay, dest, "right")
        else:
            nxt = RiverState(state.n_pairs, dest, stay, "left")
        return ok(self.normalize(nxt))

    def legal_actions(self, state: RiverState) -> list[Cross]:
        self.check_env(state)
        origin = sorted(state.bank(state.boat), key=entity_key)
        direction = "right" if state.boat == "left" else "left"
        dest = state.bank(direction)
        acts = []
        for size in range(1, BOAT_CAPACITY + 1):
            for group in combinations(origin, size):
                if unsafe_pair(group):
                    continue
                stay = [e for e in origin if e not in group]
                if unsafe_pair(stay) or unsafe_pair(list(dest) + list(group)):
                    continue
                acts.append(Cross(direction, group))
        return sorted(acts, key=str)

    def action_universe(self, state: RiverState) -> list[Cross]:
        people = entities(state.n_pairs)
        acts = [
            Cross(side, group)
            for side in SIDES
            for size in range(1, BOAT_CAPACITY + 1)
            for group in combinations(people, size)
        ]
        return sorted(acts, key=str)

    def normalize(self, state: RiverState) -> RiverState:
        self.check_env(state)
        return RiverState(
            state.n_pairs,
            tuple(sorted(set(state.left), key=entity_key)),
            tuple(sorted(set(state.right), key=entity_key)),
            state.boat,
        )

    def validate_state(self, state: RiverState) -> None:
        self.check_env(state)
        if state.boat not in SIDES:
            raise InvalidStateError(f"boat must be left or right, got {state.boat!r}")
        everyone = list(state.left) + list(state.right)
        if sorted(everyone, key=entity_key) != list(entities(state.n_pairs)):
            raise InvalidStateError("every actor and agent must be on exactly one bank")
        for side in SIDES:
            bad = unsafe_pair(state.bank(side))
            if bad:
                raise InvalidStateError(f"{bad[0]} is with {bad[1]} on the {side} bank without its agent")

    def complexity(self, state: RiverState) -> int:
        return state.n_pairs

    def parse_action(self, text: str) -> Cross:
        name, args, close = split_call(text)
        if name != "cross":
            raise ActionParseError(f"unknown river action {name!r}", 0, "cross")
        expect_arity(name, args, 2, close)
        direction, d_off = args[0]
        direction = direction.lower()
        if direction not in SIDES:
            raise ActionParseError(f"direction must be left or right, got {args[0][0]!r}", d_off, "left or right")
        inner, off = args[1]
        if not (inner.startswith("[") and inner.endswith("]")):
            raise ActionParseError("passengers must be a bracketed list", off, "[passenger, ...]")
        people = [p.lower() for p in split_list(inner[1:-1])]
        for p in people:
            if not _ENTITY.fullmatch(p):
                raise ActionParseError(f"bad passenger name {p!r}", off, "actor_<i> or agent_<i>")
        return Cross(direction, tuple(people))

    def render_state(self, state: RiverState) -> str:
        s = self.normalize(state)
        return f"left bank: [{', '.join(s.left)}] right bank: [{', '.join(s.right)}] boat: {s.boat}"

    def state_to_json(self, state: RiverState) -> dict:
        s = self.normalize(state)
        return {"n_pairs": s.n_pairs, "left": list(s.left), "right": list(s.right), "boat": s.boat}

    def state_from_json(self, data: dict) -> RiverState:
        return RiverState(int(data["n_pairs"]), tuple(data["left"]), tuple(data["right"]), data["boat"])


RIVER = River()
