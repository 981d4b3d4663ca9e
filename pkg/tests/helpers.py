"""Shared builders for the test suite."""

from __future__ import annotations

import random

from repot.envs import BlocksAction, BlocksGoal, BlocksState, CheckerState, HanoiState, RiverState, get_env
from repot.prompts import format_moves
from repot.traces import Attempt, LLMCall, TraceRecord
from repot.zoo import block_names, make_instance, sample_blocksworld, sample_hanoi, sample_river


def moves_line(plan) -> str:
    return "moves = " + format_moves(plan)


def pot_program(plan) -> str:
    """A PoT-style completion whose program prints ``plan``."""
    return f"Here is the program.\n```python\nplan = {[str(a) for a in plan]!r}\nprint('moves = [' + ', '.join(plan) + ']')\n```\n"


def seed_states(env: str, rng: random.Random):
    """A starting state of modest size for random walks."""
    if env == "hanoi":
        return sample_hanoi(rng.randint(1, 5), rng)[0]
    if env == "checker":
        return CheckerState.start(rng.randint(1, 4))
    if env == "river":
        return sample_river(rng.randint(1, 3), rng)[0]
    return sample_blocksworld(rng.randint(2, 6), rng)[0]


def random_walk(env: str, start, rng: random.Random, steps: int):
    e = get_env(env)
    state = start
    path = [state]
    for _ in range(steps):
        acts = e.legal_actions(state)
        if not acts:
            break
        state = e.step(state, rng.choice(acts)).next_state
        path.append(state)
    return path


def random_states(env: str, rng: random.Random, n: int):
    out = []
    while len(out) < n:
        out.extend(random_walk(env, seed_states(env, rng), rng, rng.randint(0, 12)))
    return out[:n]


def random_plan(env: str, start, rng: random.Random, length: int):
    """A fully valid random plan of at most ``length`` actions."""
    e = get_env(env)
    state = start
    plan = []
    for _ in range(length):
        acts = e.legal_actions(state)
        if not acts:
            break
        a = rng.choice(acts)
        plan.append(a)
        state = e.step(state, a).next_state
    return plan


def illegal_action(env: str, state, rng: random.Random):
    """An action from the universe that is invalid in ``state``, or None."""
    e = get_env(env)
    bad = [a for a in e.action_universe(state) if not e.step(state, a).valid]
    return rng.choice(bad) if bad else None


def small_instance(env: str = "hanoi", size: int = 3, pid: str | None = None):
    if env == "hanoi":
        s, g = HanoiState.tower(size, 0), HanoiState.tower(size, 2)
    elif env == "checker":
        s, g = CheckerState.start(size), CheckerState.mirrored(size)
    elif env == "river":
        s, g = RiverState.all_on(size, "left"), RiverState.all_on(size, "right")
    else:
        names = block_names(size)
        s = BlocksState.from_towers([names])
        g = BlocksGoal(tuple(("on", names[i], names[i + 1]) for i in range(size - 1)))
    return make_instance(pid or f"{env}-test-{size}", env, s, g, seed=0)


def checkpoint_policy(cases, instances):
    """Scripted derail model that can only plan from a checkpoint it is shown.

    When the rendered checkpoint state appears in the prompt it answers with the
    oracle continuation from the condition's resumption state; otherwise it
    returns an empty plan.
    """
    by_id = {c.case_id: c for c in cases}

    def policy(request, ordinal):
        case_id, condition = request.key.rsplit("/", 1)
        case = by_id[case_id]
        inst = instances[case.problem_id]
        shown = get_env(case.environment).render_state(case.checkpoint_state)
        if shown not in request.prompt:
            return "moves = []"
        plan = inst.oracle_plan if condition == "repot_restart" else inst.oracle_plan[case.checkpoint_index :]
        return moves_line(plan)

    return policy


def synthetic_record(
    pid: str,
    method: str,
    success: bool,
    *,
    calls: int = 1,
    first_prefix: int = 0,
    first_ok: bool | None = None,
    model: str = "m",
    env: str = "hanoi",
    complexity: int = 3,
    route: str | None = None,
) -> TraceRecord:
    """A schema-valid record with a chosen outcome, call count and first attempt."""
    first_ok = success if first_ok is None else first_ok
    repot = method in ("repot", "adaptive_repot")
    return TraceRecord(
        problem_id=pid,
        method=method,
        success=success,
        llm_calls=[LLMCall("p", "o", 10, 5, 1) for _ in range(calls)],
        repot_repair_calls=(calls - 1) if repot else None,
        repot_initial_pot_success=first_ok if repot else None,
        environment=env,
        complexity=complexity,
        model=model,
        route_taken=route,
        attempts=[Attempt("initial", max(first_prefix, 1), first_prefix, first_prefix + 1, first_ok)],
    )


def planted_eq2_traces(n: int = 1000) -> list[TraceRecord]:
    """repot and pot_retry records whose sample estimates are exactly
    p=0.6, q=0.2, r=0.7 (repot) and b=0.3, b'=0.2 (pot_retry)."""
    out = []
    p, q = n * 6 // 10, n * 2 // 10
    for i in range(n):
        pid = f"p{i:04d}"
        if i < p:
            out.append(synthetic_record(pid, "repot", True, first_prefix=7, first_ok=True))
        elif i < p + q:
            ok = (i - p) < q * 7 // 10
            out.append(synthetic_record(pid, "repot", ok, calls=2, first_prefix=3, first_ok=False))
        else:
            out.append(synthetic_record(pid, "repot", False, calls=2, first_prefix=0, first_ok=False))
    half = n // 4  # failed retry attempts: n/2, half of them with an empty prefix
    for i in range(n):
        pid = f"p{i:04d}"
        if i < n // 2:
            out.append(synthetic_record(pid, "pot_retry", True, first_prefix=7, first_ok=True))
        elif i < n // 2 + half:  # empty prefix: 20% succeed on retry
            ok = (i - n // 2) < half * 2 // 10
            out.append(synthetic_record(pid, "pot_retry", ok, calls=2, first_prefix=0, first_ok=False))
        else:  # non-empty prefix: 40% succeed, so 30% overall
            ok = (i - n // 2 - half) < half * 4 // 10
            out.append(synthetic_record(pid, "pot_retry", ok, calls=2, first_prefix=2, first_ok=False))
    return out


# An independent STRIPS evaluator for the four-operator domain, written from the
# textbook operator definitions and operating on plain atom sets.
def _schema(op, args):
    if op == "pick-up":
        (x,) = args
        pre = {("clear", x), ("on_table", x), ("arm_empty",)}
        return pre, {("holding", x)}, pre
    if op == "put-down":
        (x,) = args
        return {("holding", x)}, {("clear", x), ("arm_empty",), ("on_table", x)}, {("holding", x)}
    if op == "stack":
        x, y = args
        pre = {("holding", x), ("clear", y)}
        return pre, {("arm_empty",), ("clear", x), ("on", x, y)}, pre
    x, y = args  # unstack
    pre = {("on", x, y), ("clear", x), ("arm_empty",)}
    return pre, {("holding", x), ("clear", y)}, pre


def pddl_apply(atoms, op, args):
    pre, add, delete = _schema(op, args)
    if len(set(args)) != len(args) or not pre <= atoms:
        return None
    return (atoms - delete) | add


def random_blocks_pairs(n, seed):
    """(env, state, action) triples, half drawn from the legal actions."""
    rng = random.Random(seed)
    e = get_env("blocksworld")
    for s in random_states("blocksworld", rng, n):
        legal = e.legal_actions(s)
        if legal and rng.random() < 0.5:
            yield e, s, rng.choice(legal)
            continue
        names = s.blocks + ["zz"]
        op = rng.choice(["pick-up", "put-down", "stack", "unstack"])
        k = 1 if op in ("pick-up", "put-down") else 2
        args = tuple(rng.choice(names) for _ in range(k))
        yield e, s, BlocksAction(op, args)
