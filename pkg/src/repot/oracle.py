"""Reference solvers and the greedy triviality probe.

Hanoi, Checker and River are solved by breadth-first search over normalized
states with actions expanded in canonical order, so plans are shortest and
reproducible. Blocksworld uses a tower-teardown-then-rebuild planner: valid
and linear in the number of blocks, but not length-optimal.
"""

from __future__ import annotations

from collections import deque
from functools import lru_cache
from typing import Any

from .envs import (
    BlocksAction,
    BlocksGoal,
    BlocksState,
    HanoiState,
    Move,
    get_env,
)
from .envs.checker import successors as checker_successors

MAX_STATES = 5_000_000


class SearchBudgetExceeded(RuntimeError):
    """BFS visited more states than allowed before reaching the goal."""


def solve(instance: Any, max_states: int = MAX_STATES) -> list | None:
    """Oracle plan for a ProblemInstance, or ``None`` when it is unsolvable."""
    return solve_from(instance.environment, instance.initial_state, instance.goal, max_states)


def solve_from(env: str, start: Any, goal: Any, max_states: int = MAX_STATES) -> list | None:
    e = get_env(env)
    e.check_env(start, goal)
    if e.name == "blocksworld":
        return solve_blocksworld(start, goal)
    if e.name == "hanoi":
        plan = _hanoi_tower_plan(start, goal)
        if plan is not None:
            return plan
    plan_text = _bfs_cached(e.name, e.normalize(start), e.normalize(goal), max_states)
    if plan_text is None:
        return None
    return [e.parse_action(t) for t in plan_text]


@lru_cache(maxsize=512)
def _bfs_cached(env: str, start: Any, goal: Any, max_states: int) -> tuple[str, ...] | None:
    return bfs(env, start, goal, max_states)


def bfs(env: str, start: Any, goal: Any, max_states: int = MAX_STATES) -> tuple[str, ...] | None:
    """Shortest plan as canonical action texts; ``None`` if the goal is unreachable."""
    e = get_env(env)
    if e.name == "checker":
        return _bfs_checker(start.cells, goal.cells, max_states)
    start = e.normalize(start)
    if e.is_goal(start, goal):
        return ()
    parent: dict[Any, tuple[Any, str] | None] = {start: None}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for a in e.legal_actions(s):
            nxt = e.normalize(e.step(s, a).next_state)
            if nxt in parent:
                continue
            parent[nxt] = (s, str(a))
            if e.is_goal(nxt, goal):
                return _unwind(parent, nxt)
            if len(parent) > max_states:
                raise SearchBudgetExceeded(f"{e.name}: more than {max_states} states visited")
            frontier.append(nxt)
    return None


def _bfs_checker(start: str, goal: str, max_states: int) -> tuple[str, ...] | None:
    if start == goal:
        return ()
    parent: dict[str, tuple[str, str] | None] = {start: None}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for text, nxt in checker_successors(s):
            if nxt in parent:
                continue
            parent[nxt] = (s, text)
            if nxt == goal:
                return _unwind(parent, nxt)
            if len(parent) > max_states:
                raise SearchBudgetExceeded(f"checker: more than {max_states} states visited")
            frontier.append(nxt)
    return None


def _unwind(parent, node) -> tuple[str, ...]:
    out = []
    while parent[node] is not None:
        node, text = parent[node]
        out.append(text)
    return tuple(reversed(out))


def _hanoi_tower_plan(start: HanoiState, goal: HanoiState) -> list[Move] | None:
    """Recursive optimal plan when start and goal are both single full towers."""
    n = start.n_disks
    src = [i for i, p in enumerate(start.pegs) if len(p) == n]
    dst = [i for i, p in enumerate(goal.pegs) if len(p) == n]
    if n == 0 or not src or not dst or goal.n_disks != n:
        return None
    if start.pegs[src[0]] != tuple(range(n, 0, -1)) or goal.pegs[dst[0]] != tuple(range(n, 0, -1)):
        return None
    out: list[Move] = []

    def rec(k: int, a: int, b: int, spare: int) -> None:
        if k == 0:
            return
        rec(k - 1, a, spare, b)
        out.append(Move(k, a, b))
        rec(k - 1, spare, b, a)

    if src[0] != dst[0]:
        rec(n, src[0], dst[0], 3 - src[0] - dst[0])
    return out


# -- Blocksworld -------------------------------------------------------------------


def _goal_support(goal_atoms) -> dict[str, str]:
    support: dict[str, str] = {}
    for a in goal_atoms:
        if a[0] == "on":
            support[a[1]] = a[2]
        elif a[0] == "on_table":
            support[a[1]] = "table"
    return support


def _goal_consistent(support: dict[str, str], goal_atoms) -> bool:
    below: dict[str, str] = {}
    for x, y in support.items():
        if y == "table":
            continue
        if y in below:
            return False
        below[y] = x
    for x in support:
        seen = set()
        cur = x
        while cur in support and support[cur] != "table":
            if cur in seen:
                return False
            seen.add(cur)
            cur = support[cur]
    held = [a[1] for a in goal_atoms if a[0] == "holding"]
    if len(held) > 1 or (held and ("arm_empty",) in goal_atoms):
        return False
    for a in goal_atoms:
        if a[0] == "clear" and a[1] in below:
            return False
    for h in held:
        if h in support or h in below:
            return False
    return True


def solve_blocksworld(start: BlocksState, goal: BlocksGoal | BlocksState) -> list[BlocksAction] | None:
    """Tear down every tower above its lowest misplaced block, then rebuild bottom-up.

    A block counts as well placed when its support matches the goal (blocks the
    goal leaves unconstrained belong on the table) and its support is itself
    well placed. Returns ``None`` for contradictory goals.
    """
    env = get_env("blocksworld")
    goal_atoms = set(goal.atoms)
    blocks = set(start.blocks)
    if not set(b for a in goal_atoms for b in a[1:]) <= blocks:
        return None
    want = _goal_support(goal_atoms)
    if not _goal_consistent(want, goal_atoms):
        return None
    plan: list[BlocksAction] = []
    state = start

    def do(op: str, *args: str) -> None:
        nonlocal state
        a = BlocksAction(op, tuple(args))
        res = env.step(state, a)
        if not res.valid:
            raise AssertionError(f"blocksworld oracle produced an invalid action {a}: {res.error}")
        plan.append(a)
        state = res.next_state

    held = state.held()
    if held is not None:
        do("put-down", held)

    def support_map(s: BlocksState) -> dict[str, str]:
        m = {}
        for a in s.atoms:
            if a[0] == "on":
                m[a[1]] = a[2]
            elif a[0] == "on_table":
                m[a[1]] = "table"
        return m

    def well_placed(x: str, cur: dict[str, str]) -> bool:
        while True:
            target = want.get(x, "table")
            if cur.get(x) != target:
                return False
            if target == "table":
                return True
            x = target

    for tower in state.towers():
        cur = support_map(state)
        bad = [i for i, b in enumerate(tower) if not well_placed(b, cur)]
        if not bad:
            continue
        lowest = bad[0]
        for b in reversed(tower[max(lowest, 1) :]):
            do("unstack", b, cur[b])
            do("put-down", b)

    progress = True
    while progress:
        progress = False
        cur = support_map(state)
        atoms = set(state.atoms)
        for x in sorted(blocks):
            target = want.get(x, "table")
            if target == "table" or well_placed(x, cur):
                continue
            if ("clear", x) not in atoms or ("clear", target) not in atoms or not well_placed(target, cur):
                continue
            if cur.get(x) != "table":
                continue
            do("pick-up", x)
            do("stack", x, target)
            progress = True
            break

    for a in sorted(goal_atoms):
        if a[0] == "holding":
            x = a[1]
            cur = support_map(state)
            if cur.get(x) == "table":
                do("pick-up", x)
            else:
                do("unstack", x, cur[x])
    if not env.is_goal(state, goal):
        return None
    return plan


# -- greedy triviality probe ----------------------------------------------------------


def heuristic(env: str, state: Any, goal: Any) -> int:
    """Hand-coded distance-to-goal: count of misplaced items."""
    e = get_env(env)
    if e.name == "hanoi":
        return sum(1 for d in range(1, state.n_disks + 1) if state.peg_of(d) != goal.peg_of(d))
    if e.name == "checker":
        return sum(1 for a, b in zip(state.cells, goal.cells) if a != b)
    if e.name == "river":
        return len(set(goal.right) - set(state.right)) + len(set(goal.left) - set(state.left))
    return len(set(goal.atoms) - set(state.atoms))


def greedy_probe(instance: Any, budget: int = 100) -> bool:
    """Run the greedy policy for at most ``budget`` steps; True when it reaches the goal.

    Each step takes the first legal action (canonical order) that lowers the
    heuristic, else the first that keeps it level; with neither the probe stops.
    Sideways moves mean the policy can cycle until the budget runs out.
    """
    return greedy_probe_from(instance.environment, instance.initial_state, instance.goal, budget)


def greedy_probe_from(env: str, start: Any, goal: Any, budget: int = 100) -> bool:
    e = get_env(env)
    state = start
    for _ in range(budget):
        if e.is_goal(state, goal):
            return True
        h = heuristic(e.name, state, goal)
        level = None
        chosen = None
        for a in e.legal_actions(state):
            nxt = e.step(state, a).next_state
            hn = heuristic(e.name, nxt, goal)
            if hn < h:
                chosen = nxt
                break
            if hn == h and level is None:
                level = nxt
        if chosen is None:
            chosen = level
        if chosen is None:
            return False
        state = chosen
    return e.is_goal(state, goal)

