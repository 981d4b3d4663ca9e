"""Checker Jumping on a one-row board.

``L`` tokens start on the left and only move right; ``R`` tokens start on the
right and only move left. A token slides into an adjacent empty cell or jumps
over one opposing token into the empty cell behind it. Jumped tokens stay on
the board. The goal is the mirrored configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

from .base import (
    ActionParseError,
    Environment,
    InvalidStateError,
    StepResult,
    expect_arity,
    fail,
    ok,
    parse_int,
    split_call,
)

EMPTY = "_"
DIRECTION = {"L": 1, "R": -1}


@dataclass(frozen=True, slots=True)
class CheckerState:
    cells: str
    env: ClassVar[str] = "checker"

    @classmethod
    def start(cls, n: int) -> CheckerState:
        return cls("L" * n + EMPTY + "R" * n)

    @classmethod
    def mirrored(cls, n: int) -> CheckerState:
        return cls("R" * n + EMPTY + "L" * n)


@dataclass(frozen=True, slots=True)
class Slide:
    src: int
    dst: int
    env: ClassVar[str] = "checker"

    def __str__(self) -> str:
        return f"slide({self.src},{self.dst})"


@dataclass(frozen=True, slots=True)
class Jump:
    src: int
    over: int
    dst: int
    env: ClassVar[str] = "checker"

    def __str__(self) -> str:
        return f"jump({self.src},{self.over},{self.dst})"


def successors(cells: str) -> list[tuple[str, str]]:
    """Raw ``(action_text, next_cells)`` pairs; the fast path used by search."""
    out = []
    n = len(cells)
    for i, c in enumerate(cells):
        if c == EMPTY:
            continue
        d = DIRECTION[c]
        j = i + d
        if 0 <= j < n and cells[j] == EMPTY:
            nxt = list(cells)
            nxt[i], nxt[j] = EMPTY, c
            out.append((f"slide({i},{j})", "".join(nxt)))
            continue
        k = i + 2 * d
        if 0 <= k < n and cells[j] not in (EMPTY, c) and cells[k] == EMPTY:
            nxt = list(cells)
            nxt[i], nxt[k] = EMPTY, c
            out.append((f"jump({i},{j},{k})", "".join(nxt)))
    return out


class Checker(Environment):
    name = "checker"
    title = "Checker Jumping"
    rules = (
        "A single row of cells numbered from 0 on the left holds L tokens, R tokens and empty cells (_).\n"
        "- L tokens only move right; R tokens only move left.\n"
        "- slide(from, to): move a token one cell forward into an adjacent empty cell.\n"
        "- jump(from, over, to): jump a token over exactly one opposing token into the empty cell behind it.\n"
        "- Jumped tokens stay on the board. Tokens never move backwards."
    )
    action_format = "slide(from_cell, to_cell) or jump(from_cell, over_cell, to_cell), e.g. slide(2,3)"

    def step(self, state: CheckerState, action: Slide | Jump) -> StepResult:
        self.check_env(state, action)
        cells = state.cells
        n = len(cells)
        idx = (action.src, action.over, action.dst) if isinstance(action, Jump) else (action.src, action.dst)
        for i in idx:
            if not 0 <= i < n:
                return fail(state, f"cell {i} is off the board (cells are 0..{n - 1})")
        token = cells[action.src]
        if token == EMPTY:
            return fail(state, f"cell {action.src} is empty")
        d = DIRECTION[token]
        side = "right" if d > 0 else "left"
        if isinstance(action, Slide):
            if action.dst != action.src + d:
                return fail(state, f"token {token} at cell {action.src} can only slide one cell to the {side}")
        else:
            if action.over != action.src + d or action.dst != action.src + 2 * d:
                return fail(state, f"token {token} at cell {action.src} can only jump two cells to the {side}")
            between = cells[action.over]
            if between == EMPTY:
                return fail(state, f"cell {action.over} is empty; a jump must pass over a token")
            if between == token:
                return fail(state, f"cell {action.over} holds {between}; a jump must pass over an opposing token")
        if cells[action.dst] != EMPTY:
            return fail(state, f"cell {action.dst} is not empty")
        nxt = list(cells)
        nxt[action.src], nxt[action.dst] = EMPTY, token
        return ok(CheckerState("".join(nxt)))

    def legal_actions(self, state: CheckerState) -> list[Slide | Jump]:
        self.check_env(state)
        cells = state.cells
        n = len(cells)
        acts: list[Slide | Jump] = []
        for i, c in enumerate(cells):
            if c == EMPTY:
                continue
            d = DIRECTION[c]
            j, k = i + d, i + 2 * d
            if 0 <= j < n and cells[j] == EMPTY:
                acts.append(Slide(i, j))
            elif 0 <= k < n and cells[j] != c and cells[k] == EMPTY:
                acts.append(Jump(i, j, k))
        return sorted(acts, key=str)

    def action_universe(self, state: CheckerState) -> list[Slide | Jump]:
        n = len(state.cells)
        acts: list[Slide | Jump] = []
        for i in range(n):
            for d in (1, -1):
                if 0 <= i + d < n:
                    acts.append(Slide(i, i + d))
                if 0 <= i + 2 * d < n:
                    acts.append(Jump(i, i + d, i + 2 * d))
        return sorted(acts, key=str)

    def validate_state(self, state: CheckerState) -> None:
        self.check_env(state)
        bad = set(state.cells) - {"L", "R", EMPTY}
        if bad:
            raise InvalidStateError(f"unknown cell symbols {sorted(bad)}")
        if EMPTY not in state.cells:
            raise InvalidStateError("board has no empty cell")
        if state.cells.count("L") != state.cells.count("R"):
            raise InvalidStateError("L and R token counts differ")

    def complexity(self, state: CheckerState) -> int:
        return state.cells.count("L")

    def parse_action(self, text: str) -> Slide | Jump:
        name, args, close = split_call(text)
        if name == "slide":
            expect_arity(name, args, 2, close)
            return Slide(parse_int(args[0], "from_cell"), parse_int(args[1], "to_cell"))
        if name == "jump":
            expect_arity(name, args, 3, close)
            return Jump(
                parse_int(args[0], "from_cell"), parse_int(args[1], "over_cell"), parse_int(args[2], "to_cell")
            )
        raise ActionParseError(f"unknown checker action {name!r}", 0, "slide or jump")

    def render_state(self, state: CheckerState) -> str:
        self.check_env(state)
        return f"cells 0..{len(state.cells) - 1}: [{', '.join(state.cells)}]"

    def state_to_json(self, state: CheckerState) -> str:
        return state.cells

    def state_from_json(self, data: str) -> CheckerState:
        return CheckerState(str(data))


CHECKER = Checker()
