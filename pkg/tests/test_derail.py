from __future__ import annotations

import hashlib

import pytest

from repot.derail import (
    CHECKPOINTED,
    CONDITIONS,
    REGISTRY,
    Condition,
    DerailCase,
    DerailSettings,
    DerailSink,
    SkippedCase,
    checkpoint_index,
    condition_prompt,
    make_case,
    make_cases,
    read_cases,
    read_derail_records,
    register_condition,
    run_condition,
    run_derail,
    stateguard_budget,
    write_cases,
)
from repot.envs import get_env
from repot.gateway import ScriptedBackend
from repot.methods import Runner
from repot.oracle import solve_from
from repot.prompts import CHECKPOINT_MARKER
from repot.replay import replay

from helpers import checkpoint_policy, moves_line, small_instance


@pytest.fixture
def h4():
    return small_instance("hanoi", 4)


def test_checkpoint_index():
    assert [checkpoint_index(n) for n in (1, 2, 3, 5, 6, 15)] == [1, 1, 1, 1, 2, 5]


def test_case_construction(h4):
    case = make_case(h4, 0, seed=1)
    e = get_env("hanoi")
    assert case.checkpoint_index == 5
    assert case.checkpoint_state == replay("hanoi", h4.initial_state, h4.oracle_plan[:5]).boundary_state
    assert str(case.injected_action) != str(h4.oracle_plan[5])
    assert e.step(case.checkpoint_state, case.injected_action).valid
    assert case.post_injection_state == e.step(case.checkpoint_state, case.injected_action).next_state
    assert case == make_case(h4, 0, seed=1)


def test_pairing_key_is_hash_of_injection(h4):
    case = make_case(h4, 0, seed=1)
    raw = f"{case.case_id}|{case.checkpoint_index}|{case.injected_action}|{case.injection_seed}"
    assert case.pairing_key == hashlib.sha256(raw.encode()).hexdigest()[:16]


def test_short_or_forced_plans_are_skipped():
    river1 = small_instance("river", 1)
    assert isinstance(make_case(river1, 0, 0), SkippedCase)
    checker1 = small_instance("checker", 1)
    skipped = make_case(checker1, 0, 0)
    assert isinstance(skipped, SkippedCase) and "no legal non-oracle action" in skipped.reason


def test_default_zoo_case_counts(default_suite):
    skipped = []
    cases = make_cases(default_suite, seed=3, skipped=skipped)
    assert len(cases) == 725 and len(skipped) == 50
    assert len(make_cases(default_suite, seed=3, total=550)) == 550
    with pytest.raises(ValueError):
        make_cases(default_suite[:5], total=10)


def test_cases_round_trip(tmp_path, default_suite):
    cases = make_cases(default_suite[::25], seed=2)
    path = tmp_path / "cases.jsonl"
    write_cases(cases, path)
    assert read_cases(path) == cases


def test_prompts_by_condition(h4):
    case = make_case(h4, 0, 0)
    e = get_env("hanoi")
    ck, post = e.render_state(case.checkpoint_state), e.render_state(case.post_injection_state)
    p = {c: condition_prompt(h4, case, c) for c in REGISTRY}
    assert ck not in p["no_feedback"] and post in p["no_feedback"] and "Verifier message" not in p["no_feedback"]
    assert "deviated from a valid plan" in p["error_only"] and ck not in p["error_only"]
    assert f"Last valid checkpoint state: {ck}" in p["state_feedback"]
    assert "Legal moves at the checkpoint" in p["state_plus_legal_actions"]
    assert "Legal moves at the checkpoint" not in p["state_feedback"]
    for c in ("repot_full", "repot_no_prefix", "repot_restart"):
        assert CHECKPOINT_MARKER in p[c] and f"Current verified state: {ck}" in p[c]
        assert f"Blocked: [{case.injected_action}" in p[c]
    assert "already executed 5 verified moves" in p["repot_full"]
    assert "already executed" not in p["repot_no_prefix"]
    assert "from the initial state" in p["repot_restart"]


def test_separation_and_pairing(default_suite):
    cases = make_cases(default_suite, seed=7, total=60)
    instances = {i.problem_id: i for i in default_suite}
    runner = Runner(ScriptedBackend(policy=checkpoint_policy(cases, instances)))
    conditions = [c for c in CONDITIONS if c != "stateguard_rollback"]
    records, summary = run_derail(cases, instances, conditions, runner, parallelism=3)
    assert summary.paired and len(records) == 60 * len(conditions)
    for c in CHECKPOINTED:
        assert summary.rows[c] == (60, 60)
    for c in ("no_feedback", "error_only"):
        assert summary.rows[c] == (0, 60)
    assert all(r.record.n_calls == 1 for r in records)
    assert "repot_full" in summary.table("scripted")


def test_stateguard_accepts_only_legal_moves(h4):
    case = make_case(h4, 0, 0)
    e = get_env("hanoi")

    def policy(request, n):
        if n % 2 == 0:
            return "moves = [move(4,1,1)]"  # always rejected
        line = next(l for l in request.prompt.splitlines() if l.startswith("Current verified state: "))
        state = next(s for s in _states(h4) if e.render_state(s) == line.split(": ", 1)[1])
        return moves_line(solve_from("hanoi", state, h4.goal)[:1])

    rec = run_condition(case, h4, "stateguard_rollback", Runner(ScriptedBackend(policy=policy)))
    remaining = h4.oracle_plan_length - case.checkpoint_index
    assert rec.success and rec.record.n_calls == 2 * remaining
    assert rec.record.verified_plan == [str(a) for a in h4.oracle_plan[case.checkpoint_index :]]
    assert "Rejected: move(4,1,1)" in rec.record.llm_calls[1].prompt


def _states(inst):
    e = get_env(inst.environment)
    seen, frontier = {inst.initial_state}, [inst.initial_state]
    while frontier:
        s = frontier.pop()
        for a in e.legal_actions(s):
            t = e.step(s, a).next_state
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen


def test_stateguard_budget_exhaustion(h4):
    case = make_case(h4, 0, 0)
    assert stateguard_budget(h4, case) == 2 * (15 - 5)
    rec = run_condition(
        case, h4, "stateguard_rollback", Runner(ScriptedBackend(policy=lambda r, n: "no idea")),
        DerailSettings(stateguard_budget=3),
    )
    assert not rec.success and rec.record.n_calls == 3


def test_backend_failure_is_recorded(h4):
    case = make_case(h4, 0, 0)
    rec = run_condition(case, h4, "repot_full", Runner(ScriptedBackend({})))
    assert rec.record.runner_exception == "script exhausted" and not rec.success
    assert rec.record.problem_id == h4.problem_id


def test_unknown_condition_and_registration(h4):
    case = make_case(h4, 0, 0)
    with pytest.raises(KeyError):
        run_condition(case, h4, "telepathy", Runner(ScriptedBackend([])))
    with pytest.raises(ValueError):
        register_condition(REGISTRY["no_feedback"])
    cond = Condition("checkpoint_only_test", lambda i, c, s: "just the state", lambda i, c: c.checkpoint_state)
    register_condition(cond)
    try:
        assert condition_prompt(h4, case, "checkpoint_only_test") == "just the state"
    finally:
        del REGISTRY["checkpoint_only_test"]


def test_records_round_trip(tmp_path, h4):
    cases = [make_case(h4, 0, 0)]
    runner = Runner(ScriptedBackend(policy=checkpoint_policy(cases, {h4.problem_id: h4})))
    sink = DerailSink(tmp_path / "d.jsonl", {"seed": 0})
    records, _ = run_derail(cases, [h4], ["repot_full", "no_feedback"], runner, sink=sink)
    sink.close()
    back = read_derail_records(tmp_path / "d.jsonl")
    assert [r.to_json() for r in back] == [r.to_json() for r in records]
    assert isinstance(cases[0], DerailCase)
