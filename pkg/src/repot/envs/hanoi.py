"""Tower of Hanoi with three pegs. Disk 1 is the smallest; pegs list disks bottom to top."""

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

N_PEGS = 3


@dataclass(frozen=True, slots=True)
class HanoiState:
    pegs: tuple[tuple[int, ...], ...]
    env: ClassVar[str] = "hanoi"

    @classmethod
    def tower(cls, n_disks: int, peg: int = 0) -> HanoiState:
        pegs = [(), (), ()]
        pegs[peg] = tuple(range(n_disks, 0, -1))
        return cls(tuple(pegs))

    @property
    def n_disks(self) -> int:
        return sum(len(p) for p in self.pegs)

    def peg_of(self, disk: int) -> int:
        for i, p in enumerate(self.pegs):
            if disk in p:
                return i
        raise KeyError(disk)


@dataclass(frozen=True, slots=True)
class Move:
    disk: int
    src: int
    dst: int
    env: ClassVar[str] = "hanoi"

    def __str__(self) -> str:
        return f"move({self.disk},{self.src},{self.dst})"


class Hanoi(Environment):
    name = "hanoi"
    title = "Tower of Hanoi"
    rules = (
        "There are three pegs numbered 0, 1 and 2 and N disks numbered 1 (smallest) to N (largest).\n"
        "- Only one disk may be moved at a time, and only the top disk of a peg.\n"
        "- A disk may never be placed on top of a smaller disk.\n"
        "Pegs are listed bottom to top."
    )
    action_format = "move(disk, from_peg, to_peg), e.g. move(1,0,2)"

    def step(self, state: HanoiState, action: Move) -> StepResult:
        self.check_env(state, action)
        d, src, dst = action.disk, action.src, action.dst
        for peg in (src, dst):
            if not 0 <= peg < N_PEGS:
                return fail(state, f"peg {peg} does not exist (pegs are 0, 1, 2)")
        if src == dst:
            return fail(state, f"source and target are both peg {src}")
        source = state.pegs[src]
        if not source:
            return fail(state, f"peg {src} is empty")
        if source[-1] != d:
            return fail(state, f"disk {d} is not the top disk of peg {src}")
        target = state.pegs[dst]
        if target and target[-1] < d:
            return fail(state, f"cannot place disk {d} on smaller disk {target[-1]} (peg {dst})")
        pegs = list(state.pegs)
        pegs[src] = source[:-1]
        pegs[dst] = target + (d,)
        return ok(HanoiState(tuple(pegs)))

    def legal_actions(self, state: HanoiState) -> list[Move]:
        self.check_env(state)
        moves = []
        for src, peg in enumerate(state.pegs):
            if not peg:
                continue
            d = peg[-1]
            for dst, other in enumerate(state.pegs):
                if dst != src and (not other or other[-1] > d):
                    moves.append(Move(d, src, dst))
        return sorted(moves, key=str)

    def action_universe(self, state: HanoiState) -> list[Move]:
        n = state.n_disks
        acts = [
            Move(d, s, t)
            for d in range(1, n + 1)
            for s in range(N_PEGS)
            for t in range(N_PEGS)
            if s != t
        ]
        return sorted(acts, key=str)

    def normalize(self, state: HanoiState) -> HanoiState:
        self.check_env(state)
        return HanoiState(tuple(tuple(p) for p in state.pegs))

    def validate_state(self, state: HanoiState) -> None:
        self.check_env(state)
        if len(state.pegs) != N_PEGS:
            raise InvalidStateError(f"expected {N_PEGS} pegs, got {len(state.pegs)}")
        seen: list[int] = []
        for i, peg in enumerate(state.pegs):
            if any(a <= b for a, b in zip(peg, peg[1:])):
                raise InvalidStateError(f"peg {i} is not strictly decreasing bottom to top: {list(peg)}")
            seen.extend(peg)
        if sorted(seen) != list(range(1, len(seen) + 1)):
            raise InvalidStateError(f"disks must be 1..N exactly once, got {sorted(seen)}")

    def complexity(self, state: HanoiState) -> int:
        return state.n_disks

    def parse_action(self, text: str) -> Move:
        name, args, close = split_call(text)
        if name != "move":
            raise ActionParseError(f"unknown hanoi action {name!r}", 0, "move")
        expect_arity(name, args, 3, close)
        return Move(parse_int(args[0], "disk"), parse_int(args[1], "from_peg"), parse_int(args[2], "to_peg"))

    def render_state(self, state: HanoiState) -> str:
        self.check_env(state)
        return " ".join(
            f"peg{i}: [{','.join(str(d) for d in peg)}]" for i, peg in enumerate(state.pegs)
        )

    def state_to_json(self, state: HanoiState) -> dict:
        return {"pegs": [list(p) for p in state.pegs]}

    def state_from_json(self, data: dict) -> HanoiState:
        return HanoiState(tuple(tuple(int(d) for d in p) for p in data["pegs"]))


HANOI = Hanoi()
