"""Blocksworld with the four-operator STRIPS vocabulary.

States are sets of ground atoms ``on(x,y)``, ``on_table(x)``, ``clear(x)``,
``holding(x)`` and ``arm_empty``. Goals are partial: a state satisfies a goal
when it contains every goal atom.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import ClassVar, Iterable

from .base import (
    ActionParseError,
    Environment,
    InvalidStateError,
    StepResult,
    expect_arity,
    fail,
    ok,
    parse_name,
    split_call,
)

Atom = tuple[str, ...]

PREDICATES = {"on": 2, "on_table": 1, "clear": 1, "holding": 1, "arm_empty": 0}
OPERATORS = {"pick-up": 1, "put-down": 1, "stack": 2, "unstack": 2}
_ATOM = re.compile(r"\s*([a-z_]+)\s*(?:\(([^()]*)\))?\s*")


def atom_text(atom: Atom) -> str:
    if len(atom) == 1:
        return atom[0]
    return f"{atom[0]}({','.join(atom[1:])})"


def parse_atom(text: str) -> Atom:
    m = _ATOM.fullmatch(text.lower())
    if m is None:
        raise ValueError(f"malformed atom {text!r}")
    pred = m.group(1)
    args = tuple(a.strip() for a in m.group(2).split(",")) if m.group(2) else ()
    if pred not in PREDICATES:
        raise ValueError(f"unknown predicate {pred!r}")
    if len(args) != PREDICATES[pred]:
        raise ValueError(f"{pred} takes {PREDICATES[pred]} arguments, got {len(args)}")
    return (pred, *args)


def blocks_of(atoms: Iterable[Atom]) -> list[str]:
    return sorted({b for a in atoms for b in a[1:]})


@dataclass(frozen=True, slots=True)
class BlocksState:
    atoms: tuple[Atom, ...]
    env: ClassVar[str] = "blocksworld"

    @classmethod
    def from_towers(cls, towers: Iterable[Iterable[str]]) -> BlocksState:
        """Build a state with an empty arm from towers listed bottom to top."""
        atoms: set[Atom] = {("arm_empty",)}
        for tower in towers:
            tower = list(tower)
            if not tower:
                continue
            atoms.add(("on_table", tower[0]))
            for below, above in zip(tower, tower[1:]):
                atoms.add(("on", above, below))
            atoms.add(("clear", tower[-1]))
        return cls(tuple(sorted(atoms)))

    @property
    def blocks(self) -> list[str]:
        return blocks_of(self.atoms)

    def towers(self) -> list[list[str]]:
        """Towers bottom to top, ordered by bottom block. The held block is excluded."""
        above = {a[2]: a[1] for a in self.atoms if a[0] == "on"}
        out = []
        for a in sorted(self.atoms):
            if a[0] == "on_table":
                tower = [a[1]]
                while tower[-1] in above:
                    tower.append(above[tower[-1]])
                out.append(tower)
        return out

    def held(self) -> str | None:
        for a in self.atoms:
            if a[0] == "holding":
                return a[1]
        return None


@dataclass(frozen=True, slots=True)
class BlocksGoal:
    atoms: tuple[Atom, ...]
    env: ClassVar[str] = "blocksworld"

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(sorted(set(self.atoms))))


@dataclass(frozen=True, slots=True)
class BlocksAction:
    op: str
    args: tuple[str, ...]
    env: ClassVar[str] = "blocksworld"

    def __str__(self) -> str:
        return f"{self.op}({','.join(self.args)})"


def apply_op(atoms: frozenset, action: BlocksAction) -> tuple[frozenset | None, str]:
    """Return ``(next_atoms, "")`` or ``(None, error)``."""
    op, args = action.op, action.args
    known = set(blocks_of(atoms))
    for b in args:
        if b not in known:
            return None, f"unknown block {b}"
    held = next((a[1] for a in atoms if a[0] == "holding"), None)
    if op == "pick-up":
        (x,) = args
        if ("arm_empty",) not in atoms:
            return None, f"the arm is not empty (holding {held})"
        if ("on_table", x) not in atoms:
            return None, f"block {x} is not on the table"
        if ("clear", x) not in atoms:
            return None, f"block {x} is not clear"
        return (atoms - {("on_table", x), ("clear", x), ("arm_empty",)}) | {("holding", x)}, ""
    if op == "put-down":
        (x,) = args
        if ("holding", x) not in atoms:
            return None, f"the arm is not holding {x}"
        return (atoms - {("holding", x)}) | {("on_table", x), ("clear", x), ("arm_empty",)}, ""
    if op == "stack":
        x, y = args
        if ("holding", x) not in atoms:
            return None, f"the arm is not holding {x}"
        if ("clear", y) not in atoms:
            return None, f"block {y} is not clear"
        return (atoms - {("holding", x), ("clear", y)}) | {("on", x, y), ("clear", x), ("arm_empty",)}, ""
    if op == "unstack":
        x, y = args
        if ("arm_empty",) not in atoms:
            return None, f"the arm is not empty (holding {held})"
        if ("on", x, y) not in atoms:
            return None, f"block {x} is not on {y}"
        if ("clear", x) not in atoms:
            return None, f"block {x} is not clear"
        return (atoms - {("on", x, y), ("clear", x), ("arm_empty",)}) | {("holding", x), ("clear", y)}, ""
    return None, f"unknown operator {op}"


class Blocksworld(Environment):
    name = "blocksworld"
    title = "Blocksworld"
    rules = (
        "Blocks sit on a table or on other blocks; a robot arm holds at most one block.\n"
        "- pick-up(x): x is on the table, clear, and the arm is empty.\n"
        "- put-down(x): the arm holds x; x goes on the table.\n"
        "- stack(x,y): the arm holds x and y is clear; x goes on y.\n"
        "- unstack(x,y): x is on y, x is clear, and the arm is empty; the arm takes x.\n"
        "A block is clear when nothing is on it and it is not held."
    )
    action_format = "pick-up(x), put-down(x), stack(x,y) or unstack(x,y), e.g. unstack(b,a)"

    def step(self, state: BlocksState, action: BlocksAction) -> StepResult:
        self.check_env(state, action)
        nxt, err = apply_op(frozenset(state.atoms), action)
        if nxt is None:
            return fail(state, err)
        return ok(BlocksState(tuple(sorted(nxt))))

    def is_goal(self, state: BlocksState, goal: BlocksGoal | BlocksState) -> bool:
        self.check_env(state, goal)
        return set(goal.atoms) <= set(state.atoms)

    def legal_actions(self, state: BlocksState) -> list[BlocksAction]:
        self.check_env(state)
        atoms = set(state.atoms)
        acts = []
        held = state.held()
        if held is not None:
            acts.append(BlocksAction("put-down", (held,)))
            for a in atoms:
                if a[0] == "clear":
                    acts.append(BlocksAction("stack", (held, a[1])))
        elif ("arm_empty",) in atoms:
            for a in atoms:
                if a[0] == "on_table" and ("clear", a[1]) in atoms:
                    acts.append(BlocksAction("pick-up", (a[1],)))
                elif a[0] == "on" and ("clear", a[1]) in atoms:
                    acts.append(BlocksAction("unstack", (a[1], a[2])))
        return sorted(acts, key=str)

    def action_universe(self, state: BlocksState) -> list[BlocksAction]:
        bs = state.blocks
        acts = [BlocksAction(op, (x,)) for op in ("pick-up", "put-down") for x in bs]
        acts += [BlocksAction(op, (x, y)) for op in ("stack", "unstack") for x in bs for y in bs if x != y]
        return sorted(acts, key=str)

    def normalize(self, state: BlocksState) -> BlocksState:
        self.check_env(state)
        return BlocksState(tuple(sorted(set(state.atoms))))

    def validate_state(self, state: BlocksState) -> None:
        self.check_env(state)
        atoms = set(state.atoms)
        for a in atoms:
            if a[0] not in PREDICATES or len(a) - 1 != PREDICATES[a[0]]:
                raise InvalidStateError(f"malformed atom {a!r}")
        blocks = blocks_of(atoms)
        holding = [a[1] for a in atoms if a[0] == "holding"]
        if len(holding) > 1:
            raise InvalidStateError(f"holding more than one block: {sorted(holding)}")
        if bool(holding) == (("arm_empty",) in atoms):
            raise InvalidStateError("exactly one of holding(x) and arm_empty must hold")
        support: dict[str, str] = {}
        for a in atoms:
            if a[0] == "on":
                if a[1] == a[2]:
                    raise InvalidStateError(f"block {a[1]} is on itself")
                if a[1] in support:
                    raise InvalidStateError(f"block {a[1]} has two positions")
                support[a[1]] = a[2]
            elif a[0] == "on_table":
                if a[1] in support:
                    raise InvalidStateError(f"block {a[1]} has two positions")
                support[a[1]] = "table"
        for b in holding:
            if b in support:
                raise InvalidStateError(f"held block {b} is also placed")
            support[b] = "arm"
        for b in blocks:
            if b not in support:
                raise InvalidStateError(f"block {b} has no position")
        below_count: dict[str, int] = {}
        for b, s in support.items():
            if s not in ("table", "arm"):
                below_count[s] = below_count.get(s, 0) + 1
        for b, c in below_count.items():
            if c > 1:
                raise InvalidStateError(f"{c} blocks are on {b}")
            if support.get(b) == "arm":
                raise InvalidStateError(f"block {b} is held but has a block on it")
        for b in blocks:
            expect_clear = below_count.get(b, 0) == 0 and support[b] != "arm"
            if expect_clear != (("clear", b) in atoms):
                raise InvalidStateError(f"clear({b}) is inconsistent with the block positions")
        for b in blocks:
            seen = set()
            cur = b
            while support.get(cur) not in ("table", "arm", None):
                if cur in seen:
                    raise InvalidStateError(f"blocks form a cycle through {b}")
                seen.add(cur)
                cur = support[cur]

    def complexity(self, state: BlocksState) -> int:
        return len(state.blocks)

    def parse_action(self, text: str) -> BlocksAction:
        name, args, close = split_call(text)
        if name not in OPERATORS:
            raise ActionParseError(f"unknown blocksworld action {name!r}", 0, "pick-up, put-down, stack or unstack")
        expect_arity(name, args, OPERATORS[name], close)
        return BlocksAction(name, tuple(parse_name(a, "block") for a in args))

    def render_state(self, state: BlocksState) -> str:
        return ", ".join(atom_text(a) for a in self.normalize(state).atoms)

    def render_goal(self, goal: BlocksGoal | BlocksState) -> str:
        return ", ".join(atom_text(a) for a in sorted(set(goal.atoms)))

    def state_to_json(self, state: BlocksState) -> list[str]:
        return [atom_text(a) for a in self.normalize(state).atoms]

    def state_from_json(self, data: list[str]) -> BlocksState:
        return BlocksState(tuple(sorted(parse_atom(t) for t in data)))

    def goal_to_json(self, goal: BlocksGoal | BlocksState) -> list[str]:
        return [atom_text(a) for a in sorted(set(goal.atoms))]

    def goal_from_json(self, data: list[str]) -> BlocksGoal:
        return BlocksGoal(tuple(parse_atom(t) for t in data))


BLOCKSWORLD = Blocksworld()
