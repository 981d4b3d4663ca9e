"""Stratified problem-suite generation and the JSONL suite format.

Every emitted instance carries an oracle plan that replays to the goal, and
instances at the two lowest complexities of each environment must also defeat
the greedy probe. Ids and seeds derive from ``(suite seed, environment,
complexity, slot)`` only, so output does not depend on generation order.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import string
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable

from .envs import (
    BlocksGoal,
    BlocksState,
    CheckerState,
    HanoiState,
    RiverState,
    get_env,
)
from .oracle import greedy_probe_from, solve_from
from .prompts import problem_statement
from .replay import replay

COMPLEXITY_LIMITS = {
    "hanoi": (2, 14),
    "checker": (1, 9),
    "river": (1, 4),
    "blocksworld": (3, 16),
}

MAX_ATTEMPTS = 200
GREEDY_BUDGET = 100
TRIVIALITY_FLOOR = 2

_KNOWN_FIELDS = (
    "problem_id",
    "environment",
    "complexity",
    "initial_state",
    "goal",
    "oracle_plan",
    "oracle_plan_length",
    "natural_language_prompt",
    "seed",
)


class GenerationError(RuntimeError):
    pass


class SuiteFormatError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class ProblemInstance:
    problem_id: str
    environment: str
    complexity: int
    initial_state: Any
    goal: Any
    oracle_plan: list = field(default_factory=list)
    oracle_plan_length: int = 0
    natural_language_prompt: str = ""
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        e = get_env(self.environment)
        row = {
            "problem_id": self.problem_id,
            "environment": self.environment,
            "complexity": self.complexity,
            "initial_state": e.state_to_json(self.initial_state),
            "goal": e.goal_to_json(self.goal),
            "oracle_plan": [str(a) for a in self.oracle_plan],
            "oracle_plan_length": self.oracle_plan_length,
            "natural_language_prompt": self.natural_language_prompt,
            "seed": self.seed,
        }
        row.update(self.extra)
        return row

    @classmethod
    def from_json(cls, row: dict) -> ProblemInstance:
        e = get_env(row["environment"])
        return cls(
            problem_id=row["problem_id"],
            environment=row["environment"],
            complexity=int(row["complexity"]),
            initial_state=e.state_from_json(row["initial_state"]),
            goal=e.goal_from_json(row["goal"]),
            oracle_plan=[e.parse_action(t) for t in row.get("oracle_plan", [])],
            oracle_plan_length=int(row.get("oracle_plan_length", 0)),
            natural_language_prompt=row.get("natural_language_prompt", ""),
            seed=int(row.get("seed", 0)),
            extra={k: v for k, v in row.items() if k not in _KNOWN_FIELDS},
        )


@dataclass
class StratificationPlan:
    """Instance counts per ``(environment, complexity)``."""

    strata: dict[str, dict[int, int]]

    @classmethod
    def default(cls) -> StratificationPlan:
        return cls(
            {
                "hanoi": {c: 25 for c in range(2, 10)},
                "checker": {c: 25 for c in range(1, 10)},
                "river": {c: 25 for c in range(1, 5)},
                "blocksworld": {c: 25 for c in range(3, 13)},
            }
        )

    @classmethod
    def from_json(cls, data: dict) -> StratificationPlan:
        return cls({env: {int(c): int(n) for c, n in counts.items()} for env, counts in data.items()})

    def to_json(self) -> dict:
        return {env: {str(c): n for c, n in counts.items()} for env, counts in self.strata.items()}

    def total(self) -> int:
        return sum(sum(c.values()) for c in self.strata.values())

    def validate(self) -> None:
        for env, counts in self.strata.items():
            get_env(env)
            lo, hi = COMPLEXITY_LIMITS[env]
            for c, n in counts.items():
                if not lo <= c <= hi:
                    raise ValueError(f"{env} complexity {c} is outside the supported range [{lo}, {hi}]")
                if n < 0:
                    raise ValueError(f"{env} complexity {c}: negative count {n}")


def derive_seed(*parts: Any) -> int:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


# -- samplers ------------------------------------------------------------------------


def sample_hanoi(n: int, rng: random.Random) -> tuple[HanoiState, HanoiState]:
    src, dst = rng.sample(range(3), 2)
    return HanoiState.tower(n, src), HanoiState.tower(n, dst)


def sample_checker(n: int, rng: random.Random) -> tuple[CheckerState, CheckerState]:
    return CheckerState.start(n), CheckerState.mirrored(n)


@lru_cache(maxsize=None)
def _river_goal_distances(n: int) -> tuple[tuple[RiverState, int], ...]:
    env = get_env("river")
    goal = RiverState.all_on(n, "right")
    dist = {goal: 0}
    frontier = [goal]
    while frontier:
        nxt_frontier = []
        for s in frontier:
            for a in env.legal_actions(s):
                t = env.step(s, a).next_state
                if t not in dist:
                    dist[t] = dist[s] + 1
                    nxt_frontier.append(t)
        frontier = nxt_frontier
    return tuple(sorted(dist.items(), key=lambda kv: (kv[1], repr(kv[0]))))


def sample_river(n: int, rng: random.Random) -> tuple[RiverState, RiverState]:
    """Start states come from the goal's connected component, so they are solvable."""
    table = _river_goal_distances(n)
    far = max(d for _, d in table)
    floor = max(2, math.ceil(far / 2))
    pool = [s for s, d in table if d >= floor] or [s for s, d in table if d == far]
    return rng.choice(pool), RiverState.all_on(n, "right")


def _random_towers(blocks: list[str], rng: random.Random) -> list[list[str]]:
    order = blocks[:]
    rng.shuffle(order)
    towers = [[order[0]]]
    for b in order[1:]:
        if rng.random() < 1 / 3:
            towers.append([b])
        else:
            towers[-1].append(b)
    return towers


def block_names(n: int) -> list[str]:
    return list(string.ascii_lowercase[:n])


def sample_blocksworld(n: int, rng: random.Random) -> tuple[BlocksState, BlocksGoal]:
    blocks = block_names(n)
    start = BlocksState.from_towers(_random_towers(blocks, rng))
    target = BlocksState.from_towers(_random_towers(blocks, rng))
    goal = BlocksGoal(tuple(a for a in target.atoms if a[0] in ("on", "on_table")))
    return start, goal


SAMPLERS = {
    "hanoi": sample_hanoi,
    "checker": sample_checker,
    "river": sample_river,
    "blocksworld": sample_blocksworld,
}


# -- generation ------------------------------------------------------------------------


def make_instance(
    problem_id: str, env: str, initial: Any, goal: Any, seed: int = 0, oracle_plan: list | None = None
) -> ProblemInstance:
    """Build an instance, solving it when no oracle plan is given. Raises if unsolvable."""
    e = get_env(env)
    e.validate_state(initial)
    plan = oracle_plan if oracle_plan is not None else solve_from(env, initial, goal)
    if plan is None:
        raise GenerationError(f"{problem_id}: instance is unsolvable")
    return ProblemInstance(
        problem_id=problem_id,
        environment=env,
        complexity=e.complexity(initial),
        initial_state=initial,
        goal=goal,
        oracle_plan=list(plan),
        oracle_plan_length=len(plan),
        natural_language_prompt=problem_statement(env, initial, goal),
        seed=seed,
    )


def generate_instance(
    env: str,
    complexity: int,
    slot: int,
    suite_seed: int,
    *,
    filter_trivial: bool,
    greedy_budget: int = GREEDY_BUDGET,
    max_attempts: int = MAX_ATTEMPTS,
) -> ProblemInstance:
    e = get_env(env)
    seed = derive_seed(suite_seed, env, complexity, slot)
    rng = random.Random(seed)
    pid = f"{env}-c{complexity:02d}-{slot:03d}"
    for _ in range(max_attempts):
        initial, goal = SAMPLERS[env](complexity, rng)
        if e.is_goal(initial, goal):
            continue
        plan = solve_from(env, initial, goal)
        if plan is None:
            continue
        if filter_trivial and greedy_probe_from(env, initial, goal, greedy_budget):
            continue
        inst = make_instance(pid, env, initial, goal, seed, plan)
        check = replay(env, initial, plan, goal)
        if not (check.fully_valid and check.goal_reached):
            raise GenerationError(f"{pid}: oracle plan does not replay to the goal")
        return inst
    raise GenerationError(
        f"stratum {env}/complexity {complexity}: no acceptable instance after {max_attempts} attempts (slot {slot})"
    )


def generate_suite(
    plan: StratificationPlan | None = None,
    seed: int = 0,
    *,
    greedy_budget: int = GREEDY_BUDGET,
    max_attempts: int = MAX_ATTEMPTS,
) -> list[ProblemInstance]:
    plan = plan or StratificationPlan.default()
    plan.validate()
    out = []
    for env in sorted(plan.strata, key=lambda k: ("hanoi", "checker", "river", "blocksworld").index(k)):
        counts = plan.strata[env]
        floor = set(sorted(counts)[:TRIVIALITY_FLOOR])
        for c in sorted(counts):
            for slot in range(counts[c]):
                out.append(
                    generate_instance(
                        env,
                        c,
                        slot,
                        seed,
                        filter_trivial=c in floor,
                        greedy_budget=greedy_budget,
                        max_attempts=max_attempts,
                    )
                )
    return out


# -- JSONL --------------------------------------------------------------------------------


def dumps_instance(inst: ProblemInstance) -> str:
    return json.dumps(inst.to_json(), ensure_ascii=False)


def write_suite(instances: Iterable[ProblemInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(dumps_instance(inst) + "\n")


def read_suite(path: str | Path) -> list[ProblemInstance]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SuiteFormatError(f"malformed JSON ({exc.msg})", lineno) from None
            try:
                out.append(ProblemInstance.from_json(row))
            except (KeyError, TypeError, ValueError) as exc:
                raise SuiteFormatError(f"bad instance: {exc}", lineno) from None
    return out
