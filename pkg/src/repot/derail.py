"""Injected-error recovery benchmark.

Each case replays an oracle plan to a checkpoint about a third of the way in,
then injects one legal action that differs from the oracle's next move. Every
recovery condition of a case sees the same injection, so results are paired.

The controller always knows the injected move was a deviation. Conditions
differ only in what they show the model and where the model's plan resumes:

=========================  ==========================  ======================
condition                  shows                       plan resumes from
=========================  ==========================  ======================
no_feedback                post-injection state        post-injection state
error_only                 + one-line deviation notice post-injection state
state_feedback             checkpoint + wrong action   checkpoint
state_plus_legal_actions   + legal moves at checkpoint checkpoint
stateguard_rollback        one move per call, checked  checkpoint
repot_full                 repair prompt               checkpoint
repot_no_prefix            repair prompt, no prefix    checkpoint
repot_restart              repair prompt, full plan    initial state
=========================  ==========================  ======================

For the RePoT conditions the verified prefix is the oracle prefix, so the
repair boundary is the checkpoint state and the injected move is the failed
action.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .envs import get_env
from .gateway import ExtractionError, extract_plan
from .methods import Runner, _BackendFailure, _Trace
from .prompts import build_repair_prompt, format_moves, make_view, repair_max_moves
from .replay import replay
from .traces import Attempt, TraceRecord
from .zoo import derive_seed

log = logging.getLogger(__name__)

MIN_ORACLE_LENGTH = 3

CONDITIONS = (
    "no_feedback",
    "error_only",
    "state_feedback",
    "state_plus_legal_actions",
    "stateguard_rollback",
    "repot_full",
    "repot_no_prefix",
    "repot_restart",
)

CHECKPOINTED = ("state_feedback", "state_plus_legal_actions", "repot_full", "repot_no_prefix", "repot_restart")


def checkpoint_index(oracle_length: int) -> int:
    return max(1, oracle_length // 3)


@dataclass(frozen=True)
class DerailCase:
    case_id: str
    problem_id: str
    environment: str
    checkpoint_index: int
    checkpoint_state: Any
    injected_action: Any
    post_injection_state: Any
    injection_valid: bool
    injection_seed: int

    @property
    def pairing_key(self) -> str:
        raw = f"{self.case_id}|{self.checkpoint_index}|{self.injected_action}|{self.injection_seed}"
        return hashlib.sha256(raw.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        e = get_env(self.environment)
        return {
            "case_id": self.case_id,
            "problem_id": self.problem_id,
            "environment": self.environment,
            "checkpoint_index": self.checkpoint_index,
            "checkpoint_state": e.state_to_json(self.checkpoint_state),
            "injected_action": str(self.injected_action),
            "post_injection_state": e.state_to_json(self.post_injection_state),
            "injection_valid": self.injection_valid,
            "injection_seed": self.injection_seed,
        }

    @classmethod
    def from_json(cls, row: dict) -> DerailCase:
        e = get_env(row["environment"])
        return cls(
            case_id=row["case_id"],
            problem_id=row["problem_id"],
            environment=row["environment"],
            checkpoint_index=int(row["checkpoint_index"]),
            checkpoint_state=e.state_from_json(row["checkpoint_state"]),
            injected_action=e.parse_action(row["injected_action"]),
            post_injection_state=e.state_from_json(row["post_injection_state"]),
            injection_valid=bool(row["injection_valid"]),
            injection_seed=int(row["injection_seed"]),
        )


@dataclass(frozen=True)
class SkippedCase:
    problem_id: str
    reason: str


def make_case(instance: Any, slot: int, seed: int) -> DerailCase | SkippedCase:
    e = get_env(instance.environment)
    plan = list(instance.oracle_plan)
    if len(plan) < MIN_ORACLE_LENGTH:
        return SkippedCase(instance.problem_id, f"oracle plan has {len(plan)} actions (< {MIN_ORACLE_LENGTH})")
    ci = checkpoint_index(len(plan))
    out = replay(e, instance.initial_state, plan[:ci])
    state = out.boundary_state
    oracle_next = str(plan[ci])
    choices = [a for a in e.legal_actions(state) if str(a) != oracle_next]
    if not choices:
        return SkippedCase(instance.problem_id, "no legal non-oracle action at the checkpoint")
    inj_seed = derive_seed(seed, "derail", instance.problem_id, slot)
    injected = random.Random(inj_seed).choice(choices)
    return DerailCase(
        case_id=f"{instance.problem_id}#{slot}",
        problem_id=instance.problem_id,
        environment=e.name,
        checkpoint_index=ci,
        checkpoint_state=state,
        injected_action=injected,
        post_injection_state=e.step(state, injected).next_state,
        injection_valid=True,
        injection_seed=inj_seed,
    )


def make_cases(
    suite: Sequence[Any],
    per_problem: int = 1,
    seed: int = 0,
    total: int | None = None,
    skipped: list | None = None,
) -> list[DerailCase]:
    """Cases in suite order. ``total`` keeps a seeded random subset of that size.

    Skipped problems are logged and, when ``skipped`` is given, appended to it.
    """
    cases = []
    for inst in suite:
        for slot in range(per_problem):
            c = make_case(inst, slot, seed)
            if isinstance(c, SkippedCase):
                log.info("derail: skipping %s: %s", c.problem_id, c.reason)
                if skipped is not None:
                    skipped.append(c)
                continue
            cases.append(c)
    if total is not None:
        if total > len(cases):
            raise ValueError(f"asked for {total} cases but only {len(cases)} are available")
        keep = set(random.Random(derive_seed(seed, "derail-subset")).sample(range(len(cases)), total))
        cases = [c for i, c in enumerate(cases) if i in keep]
    return cases


def write_cases(cases: Iterable[DerailCase], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for c in cases:
            f.write(json.dumps(c.to_json()) + "\n")


def read_cases(path: str | Path) -> list[DerailCase]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                try:
                    out.append(DerailCase.from_json(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}: line {lineno}: {exc}") from None
    return out


# -- prompts ---------------------------------------------------------------------------------


def deviation_notice(case: DerailCase) -> str:
    return f"the last executed action {case.injected_action} deviated from a valid plan to the goal"


def _contract(origin: str) -> str:
    return (
        "Write Python code that prints exactly one line:\n"
        "  moves = [...]\n"
        f"containing the primitive moves to apply from {origin} to reach the goal."
    )


def _prompt_post_injection(instance: Any, case: DerailCase, with_error: bool) -> str:
    e = get_env(case.environment)
    lines = [instance.natural_language_prompt, "", f"Current state: {e.render_state(case.post_injection_state)}"]
    if with_error:
        lines.append(f"Verifier message: {deviation_notice(case)}")
    lines.append(_contract("the current state"))
    return "\n".join(lines) + "\n"


def _prompt_checkpoint(instance: Any, case: DerailCase, with_legal: bool) -> str:
    e = get_env(case.environment)
    lines = [
        instance.natural_language_prompt,
        "",
        f"Last valid checkpoint state: {e.render_state(case.checkpoint_state)}",
        f"Attempted wrong action: {case.injected_action}",
    ]
    if with_legal:
        lines.append(f"Legal moves at the checkpoint: {format_moves(e.legal_actions(case.checkpoint_state))}")
    lines.append(_contract("the checkpoint state"))
    return "\n".join(lines) + "\n"


def _repot_prompt(instance: Any, case: DerailCase, hide_prefix: bool, from_start: bool, T: int, K: int | None) -> str:
    prefix = list(instance.oracle_plan[: case.checkpoint_index])
    view = make_view(case.environment, prefix, case.checkpoint_state, deviation_notice(case), case.injected_action, T)
    return build_repair_prompt(
        instance, view, max_moves=repair_max_moves(instance, K), hide_prefix=hide_prefix, from_start=from_start
    )


def stateguard_prompt(instance: Any, state: Any, last_rejection: str | None) -> str:
    e = get_env(instance.environment)
    lines = [instance.natural_language_prompt, "", f"Current verified state: {e.render_state(state)}"]
    if last_rejection:
        lines.append(f"Rejected: {last_rejection}")
    lines.append("Propose exactly one next move as a single line:\n  moves = [action]")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Condition:
    """A single-call condition: prompt builder plus resumption state selector."""

    name: str
    prompt: Callable[[Any, DerailCase, "DerailSettings"], str]
    resume: Callable[[Any, DerailCase], Any]


@dataclass(frozen=True)
class DerailSettings:
    T: int = 4
    K: int | None = None
    stateguard_budget: int | None = None


def _post(inst, case):
    return case.post_injection_state


def _ckpt(inst, case):
    return case.checkpoint_state


def _s0(inst, case):
    return inst.initial_state


REGISTRY: dict[str, Condition] = {
    "no_feedback": Condition("no_feedback", lambda i, c, s: _prompt_post_injection(i, c, False), _post),
    "error_only": Condition("error_only", lambda i, c, s: _prompt_post_injection(i, c, True), _post),
    "state_feedback": Condition("state_feedback", lambda i, c, s: _prompt_checkpoint(i, c, False), _ckpt),
    "state_plus_legal_actions": Condition(
        "state_plus_legal_actions", lambda i, c, s: _prompt_checkpoint(i, c, True), _ckpt
    ),
    "repot_full": Condition("repot_full", lambda i, c, s: _repot_prompt(i, c, False, False, s.T, s.K), _ckpt),
    "repot_no_prefix": Condition(
        "repot_no_prefix", lambda i, c, s: _repot_prompt(i, c, True, False, s.T, s.K), _ckpt
    ),
    "repot_restart": Condition("repot_restart", lambda i, c, s: _repot_prompt(i, c, False, True, s.T, s.K), _s0),
}


def register_condition(condition: Condition) -> None:
    """Add a single-call condition to the registry (names must be new)."""
    if condition.name in REGISTRY or condition.name == "stateguard_rollback":
        raise ValueError(f"condition {condition.name!r} already exists")
    REGISTRY[condition.name] = condition


def resumption_state(instance: Any, case: DerailCase, condition: str) -> Any:
    if condition == "stateguard_rollback":
        return case.checkpoint_state
    return REGISTRY[condition].resume(instance, case)


def condition_prompt(instance: Any, case: DerailCase, condition: str, settings: DerailSettings | None = None) -> str:
    return REGISTRY[condition].prompt(instance, case, settings or DerailSettings())


# -- running ------------------------------------------------------------------------------


@dataclass
class DerailRecord:
    """A TraceRecord plus the case fields; flattened into one JSON object on disk."""

    case_id: str
    condition: str
    pairing_key: str
    checkpoint_index: int
    injected_action: str
    injection_seed: int
    record: TraceRecord

    @property
    def success(self) -> bool:
        return self.record.success

    def to_json(self) -> dict:
        row = self.record.to_json()
        row.update(
            case_id=self.case_id,
            condition=self.condition,
            pairing_key=self.pairing_key,
            checkpoint_index=self.checkpoint_index,
            injected_action=self.injected_action,
            injection_seed=self.injection_seed,
        )
        return row

    @classmethod
    def from_json(cls, row: dict) -> DerailRecord:
        row = dict(row)
        extra = {k: row.pop(k) for k in ("case_id", "condition", "pairing_key", "checkpoint_index",
                                          "injected_action", "injection_seed")}
        return cls(record=TraceRecord.from_json(row), **extra)


def _record(runner: Runner, trace: _Trace, case: DerailCase, condition: str,
            out, error: str | None, exception: str | None, t0: float) -> DerailRecord:
    inst = trace.instance
    success = bool(out is not None and out.goal_reached and exception is None)
    rec = TraceRecord(
        problem_id=case.problem_id,
        method=condition,
        success=success,
        llm_calls=trace.calls,
        verified_prefix_len=len(out.prefix) if out is not None else 0,
        plan_len=out.plan_len if out is not None else 0,
        first_failure_index=None if out is None or out.fully_valid else out.failure_index,
        verifier_error=None if success else (error or (out.error if out is not None else None) or None),
        runner_exception=exception,
        wall_ms=int((runner.clock() - t0) * 1000),
        seed=case.injection_seed,
        environment=inst.environment,
        complexity=inst.complexity,
        model=runner.model_name,
        attempts=trace.attempts,
        verified_plan=[str(a) for a in out.prefix] if out is not None else [],
    )
    return DerailRecord(case.case_id, condition, case.pairing_key, case.checkpoint_index,
                        str(case.injected_action), case.injection_seed, rec)


def _stateguard(runner: Runner, trace: _Trace, case: DerailCase, budget: int) -> tuple[list, str | None]:
    """Propose-verify loop from the checkpoint; rejected moves are never applied."""
    inst = trace.instance
    e = get_env(inst.environment)
    state = case.checkpoint_state
    accepted: list = []
    rejection = None
    for _ in range(budget):
        if e.is_goal(state, inst.goal):
            break
        text = runner.call(trace, stateguard_prompt(inst, state, rejection))
        try:
            plan = extract_plan(inst.environment, text, "cot").plan
        except ExtractionError as exc:
            rejection = f"no move could be read ({exc})"
            trace.attempts.append(Attempt("step", 0, 0, 1, False, str(exc)))
            continue
        if not plan:
            rejection = "no move proposed"
            trace.attempts.append(Attempt("step", 0, 0, 1, False, None))
            continue
        res = e.step(state, plan[0])
        if res.valid:
            state = res.next_state
            accepted.append(plan[0])
            rejection = None
        else:
            rejection = f"{plan[0]}: {res.error}"
        trace.attempts.append(
            Attempt("step", 1, int(res.valid), 2 if res.valid else 1, e.is_goal(state, inst.goal), None)
        )
    return accepted, rejection


def stateguard_budget(instance: Any, case: DerailCase, override: int | None = None) -> int:
    if override is not None:
        return override
    return 2 * (len(instance.oracle_plan) - case.checkpoint_index)


def run_condition(
    case: DerailCase,
    instance: Any,
    condition: str,
    runner: Runner,
    settings: DerailSettings | None = None,
) -> DerailRecord:
    """Run one condition on one case. Success means the plan replays to the goal
    from the condition's resumption state."""
    settings = settings or DerailSettings()
    if instance.problem_id != case.problem_id:
        raise ValueError(f"case {case.case_id} belongs to {case.problem_id}, not {instance.problem_id}")
    if condition != "stateguard_rollback" and condition not in REGISTRY:
        raise KeyError(f"unknown derail condition {condition!r}")
    trace = _Trace(_KeyedInstance(instance, f"{case.case_id}/{condition}"))
    t0 = runner.clock()
    start = resumption_state(instance, case, condition)
    plan: list = []
    error = None
    try:
        if condition == "stateguard_rollback":
            budget = stateguard_budget(instance, case, settings.stateguard_budget)
            plan, _ = _stateguard(runner, trace, case, budget)
        else:
            text = runner.call(trace, condition_prompt(instance, case, condition, settings))
            try:
                plan = extract_plan(instance.environment, text, "pot", executor=runner._execute).plan
            except ExtractionError as exc:
                error = f"extraction failed: {exc}"
    except _BackendFailure as exc:
        out = replay(instance.environment, start, plan, instance.goal)
        return _record(runner, trace, case, condition, out, None, str(exc), t0)
    out = replay(instance.environment, start, plan, instance.goal)
    if condition != "stateguard_rollback":
        trace.attempts.append(
            Attempt("recovery", out.plan_len, len(out.prefix), out.failure_index, out.goal_reached, error)
        )
    return _record(runner, trace, case, condition, out, error, None, t0)


class _KeyedInstance:
    """Instance proxy whose ``problem_id`` doubles as the scripted-backend key."""

    def __init__(self, inner: Any, key: str) -> None:
        self._inner = inner
        self.problem_id = key

    def __getattr__(self, name: str) -> Any:
        return getattr(self._inner, name)


@dataclass
class DerailSummary:
    rows: dict[str, tuple[int, int]] = field(default_factory=dict)  # condition -> (successes, n)
    paired: bool = True

    def rate(self, condition: str) -> float | None:
        s, n = self.rows[condition]
        return None if n == 0 else s / n

    def table(self, model: str = "model") -> str:
        width = max([len("condition")] + [len(c) for c in self.rows])
        lines = [f"{'condition':<{width}}  {model:>10}  {'n':>5}"]
        for cond, (s, n) in self.rows.items():
            pct = f"{100 * s / n:.1f}" if n else "-"
            lines.append(f"{cond:<{width}}  {pct:>10}  {n:>5}")
        return "\n".join(lines)


def summarize_derail(records: Sequence[DerailRecord], conditions: Sequence[str]) -> DerailSummary:
    acc: dict[str, list[int]] = {c: [0, 0] for c in conditions}
    keys: dict[str, set] = defaultdict(set)
    for r in records:
        acc[r.condition][0] += int(r.success)
        acc[r.condition][1] += 1
        keys[r.case_id].add(r.pairing_key)
    per_case = defaultdict(set)
    for r in records:
        per_case[r.case_id].add(r.condition)
    paired = all(len(k) == 1 for k in keys.values()) and all(
        conds == set(conditions) for conds in per_case.values()
    )
    return DerailSummary({c: (v[0], v[1]) for c, v in acc.items()}, paired)


def run_derail(
    cases: Sequence[DerailCase],
    instances: dict[str, Any] | Sequence[Any],
    conditions: Sequence[str],
    runner: Runner,
    sink: Any = None,
    parallelism: int = 1,
    settings: DerailSettings | None = None,
) -> tuple[list[DerailRecord], DerailSummary]:
    """Every condition on every case; cases run concurrently, conditions sequentially."""
    if not isinstance(instances, dict):
        instances = {i.problem_id: i for i in instances}
    for c in conditions:
        if c != "stateguard_rollback" and c not in REGISTRY:
            raise KeyError(f"unknown derail condition {c!r}")

    def one_case(case: DerailCase) -> list[DerailRecord]:
        inst = instances[case.problem_id]
        return [run_condition(case, inst, c, runner, settings) for c in conditions]

    if parallelism <= 1:
        batches = [one_case(c) for c in cases]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            batches = list(pool.map(one_case, cases))
    records = [r for b in batches for r in b]
    if sink is not None:
        for r in records:
            sink.write_row(r.to_json())
    return records, summarize_derail(records, conditions)


class DerailSink:
    def __init__(self, path: str | Path, header: dict | None = None) -> None:
        self._fh = open(path, "w", encoding="utf-8")
        if header is not None:
            self.write_row({"kind": "header", **header})

    def write_row(self, row: dict) -> None:
        self._fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_derail_records(path: str | Path) -> list[DerailRecord]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            row = json.loads(line)
            if row.get("kind") == "header":
                continue
            out.append(DerailRecord.from_json(row))
    return out
