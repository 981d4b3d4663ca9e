from __future__ import annotations

import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repot.envs import Move
from repot.gateway import ScriptedBackend
from repot.methods import (
    MethodConfig,
    Runner,
    call_budget,
    choose_route,
    majority_plan,
    run_method,
    run_suite,
)
from repot.prompts import CHECKPOINT_MARKER
from repot.replay import replay
from repot.traces import TraceRecord, TraceSink, read_traces

from helpers import moves_line, pot_program, small_instance

JUNK = "moves = [move(9,9,9)]"


def _runner(script, **kw) -> Runner:
    return Runner(ScriptedBackend(script), model_name="scripted", **kw)


def _run(method, inst, script, **cfg):
    return run_method(_runner({inst.problem_id: script}), inst, MethodConfig(method, **cfg))


def _broken(inst, keep: int):
    """Oracle plan cut after ``keep`` moves, followed by an illegal move."""
    return moves_line(list(inst.oracle_plan[:keep]) + [Move(3, 1, 1)])


def _rest(inst, keep: int, upto: int | None = None):
    return moves_line(inst.oracle_plan[keep:upto])


@pytest.fixture
def h4():
    return small_instance("hanoi", 4)  # oracle length 15


# -- single-call methods --------------------------------------------------------------------


def test_pot_success_and_failure(h4):
    ok = _run("pot", h4, [moves_line(h4.oracle_plan)])
    assert ok.success and ok.n_calls == 1 and ok.verified_prefix_len == 15
    assert ok.first_failure_index is None and ok.verifier_error is None
    assert ok.repot_repair_calls is None and ok.repot_initial_pot_success is None
    bad = _run("pot", h4, [_broken(h4, 5)])
    assert not bad.success and bad.first_failure_index == 6 and bad.verified_prefix_len == 5
    assert bad.plan_len == 6 and bad.verifier_error


def test_valid_plan_short_of_goal(h4):
    r = _run("cot", h4, [moves_line(h4.oracle_plan[:4])])
    assert not r.success and r.first_failure_index is None and r.verified_prefix_len == 4


def test_extraction_failure_is_an_empty_plan(h4):
    r = _run("pot", h4, ["I give up."])
    assert not r.success and r.verified_prefix_len == 0 and r.plan_len == 0
    assert r.verifier_error == "extraction failed: no plan"
    assert r.attempts[0].extraction_error == "no plan"


def test_pot_runs_program_in_sandbox(h4):
    r = _run("pot", h4, [pot_program(h4.oracle_plan)])
    assert r.success


def test_pot_retry(h4):
    r = _run("pot_retry", h4, [JUNK, moves_line(h4.oracle_plan)])
    assert r.success and r.n_calls == 2
    assert r.llm_calls[0].prompt == r.llm_calls[1].prompt
    first = _run("pot_retry", h4, [moves_line(h4.oracle_plan)])
    assert first.success and first.n_calls == 1


def test_sc_majority_and_ties():
    assert majority_plan([("a",), ("b",), ("b",), None]) == ("b",)
    assert majority_plan([("a",), ("b",), None]) == ("a",)
    assert majority_plan([None, None]) is None


def test_sc_uses_k_calls(h4):
    script = [JUNK] * 3 + [moves_line(h4.oracle_plan)] * 5
    r = _run("sc", h4, script, k=8)
    assert r.success and r.n_calls == 8
    assert all(c.prompt == r.llm_calls[0].prompt for c in r.llm_calls)


def test_sc_all_unparseable(h4):
    r = _run("sc", h4, ["nothing"] * 3, k=3)
    assert not r.success and r.verifier_error.startswith("extraction failed")


# -- RePoT ----------------------------------------------------------------------------------


def test_repot_repairs_from_boundary(h4):
    r = _run("repot", h4, [_broken(h4, 6), _rest(h4, 6)])
    assert r.success and r.n_calls == 2
    assert r.repot_repair_calls == 1 and r.repot_initial_pot_success is False
    assert r.verified_prefix_len == 15
    assert r.verified_plan == [str(a) for a in h4.oracle_plan]
    repair_prompt = r.llm_calls[1].prompt
    assert CHECKPOINT_MARKER in repair_prompt
    assert "You have already executed 6 verified moves." in repair_prompt
    assert "Blocked: [move(3,1,1)" in repair_prompt


def test_repot_initial_success_has_no_repair(h4):
    r = _run("repot", h4, [moves_line(h4.oracle_plan)])
    assert r.success and r.n_calls == 1 and r.repot_repair_calls == 0 and r.repot_initial_pot_success


def test_repot_commits_short_valid_repair(h4):
    r = _run("repot", h4, [_broken(h4, 3), _rest(h4, 3, 10)], R=1)
    assert not r.success and r.verified_prefix_len == 10
    assert r.first_failure_index is None and r.plan_len == 10


def test_repot_multi_round(h4):
    script = [_broken(h4, 3), _rest(h4, 3, 10), _rest(h4, 10)]
    r = _run("repot", h4, script, R=2)
    assert r.success and r.n_calls == 3 and r.repot_repair_calls == 2
    assert "You have already executed 10 verified moves." in r.llm_calls[2].prompt


def test_repot_failure_index_is_global(h4):
    bad_repair = moves_line(list(h4.oracle_plan[4:7]) + [Move(4, 2, 2)])
    r = _run("repot", h4, [_broken(h4, 4), bad_repair], R=1)
    assert not r.success and r.verified_prefix_len == 7
    assert r.first_failure_index == 8 and r.plan_len == 8


def test_repot_with_zero_repairs_is_pot(h4):
    r = _run("repot", h4, [_broken(h4, 4)], R=0)
    assert r.n_calls == 1 and r.repot_repair_calls == 0 and not r.success


def test_repair_prompt_stable_block_identical_across_rounds(h4):
    script = [_broken(h4, 2), moves_line(h4.oracle_plan[2:5] + [Move(4, 1, 1)]), _rest(h4, 5)]
    r = _run("repot", h4, script, R=2)
    heads = {c.prompt.split(CHECKPOINT_MARKER)[0] for c in r.llm_calls[1:]}
    assert r.success and len(heads) == 1


# -- adaptive routing -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "initial, route, retry_kind",
    [
        ("oracle", "initial_success", None),
        ("empty", "fresh_retry_empty", "retry"),
        ("keep1", "fresh_retry_short_prefix", "retry"),
        ("keep6", "suffix_repair", "repair"),
    ],
)
def test_adaptive_routes(h4, initial, route, retry_kind):
    first = {
        "oracle": moves_line(h4.oracle_plan),
        "empty": "moves = []",
        # prefix 1 of 12 proposed moves: phi = 1/12 < 0.15
        "keep1": moves_line(list(h4.oracle_plan[:1]) + [Move(3, 1, 1)] + list(h4.oracle_plan[2:12])),
        "keep6": _broken(h4, 6),
    }[initial]
    second = moves_line(h4.oracle_plan) if retry_kind == "retry" else _rest(h4, 6)
    r = _run("adaptive_repot", h4, [first, second])
    assert r.route_taken == route and r.success
    if retry_kind:
        assert r.attempts[1].kind == retry_kind and r.n_calls == 2
        assert r.repot_repair_calls == 1
    else:
        assert r.n_calls == 1


def test_choose_route_threshold_boundary(h4):
    # 2 valid moves out of 13 proposed: phi = 2/13 > 0.15 -> repair
    plan = list(h4.oracle_plan[:2]) + [Move(3, 1, 1)] + list(h4.oracle_plan[3:13])
    out = replay("hanoi", h4.initial_state, plan, h4.goal)
    assert choose_route(out, 0.15) == "suffix_repair"
    assert choose_route(out, 0.16) == "fresh_retry_short_prefix"


def test_adaptive_later_rounds_repair(h4):
    r = _run("adaptive_repot", h4, ["moves = []", moves_line(h4.oracle_plan[:5]), _rest(h4, 5)], R=2)
    assert r.success and [a.kind for a in r.attempts] == ["initial", "retry", "repair"]


# -- budgets --------------------------------------------------------------------------------


def test_call_budgets():
    assert call_budget(MethodConfig("pot")) == (1, 1)
    assert call_budget(MethodConfig("sc", k=5)) == (5, 5)
    assert call_budget(MethodConfig("repot", R=3)) == (1, 4)
    with pytest.raises(ValueError, match="unknown method"):
        MethodConfig("tot")
    with pytest.raises(ValueError):
        MethodConfig("repot", R=-1)
    with pytest.raises(ValueError):
        MethodConfig("adaptive_repot", phi_threshold=1.5)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(["pot", "cot", "pot_retry", "repot", "adaptive_repot", "sc"]),
    st.integers(0, 3),
    st.lists(st.integers(0, 16), min_size=5, max_size=5),
)
def test_budget_law_on_random_scripts(method, R, cuts):
    inst = small_instance("hanoi", 4)
    rng = random.Random(sum(cuts))
    script = []
    for c in cuts:
        plan = list(inst.oracle_plan[:c])
        if rng.random() < 0.5:
            plan.append(Move(4, 1, 1))
        script.append(moves_line(plan))
    config = MethodConfig(method, R=R, k=3)
    r = run_method(_runner({inst.problem_id: script}), inst, config)
    lo, hi = call_budget(config)
    assert lo <= r.n_calls <= hi
    out = replay("hanoi", inst.initial_state, r.verified_plan, inst.goal)
    assert out.fully_valid and out.goal_reached == r.success
    assert r.verified_prefix_len == len(r.verified_plan)
    TraceRecord.from_json(r.to_json())


# -- suite controller -----------------------------------------------------------------------


def _suite(n=10):
    return [replace(small_instance("hanoi", 3), problem_id=f"p{i}") for i in range(n)]


def _script(suite):
    out = {}
    for i, inst in enumerate(suite):
        out[inst.problem_id] = [_broken(inst, i % 7), _rest(inst, i % 7)] if i % 3 else [moves_line(inst.oracle_plan)]
    return out


def _strip(r: TraceRecord) -> dict:
    row = r.to_json()
    row["wall_ms"] = 0
    for c in row["llm_calls"]:
        c["latency_ms"] = 0
    return row


def test_parallel_matches_serial():
    suite = _suite(12)
    cfg = MethodConfig("repot")
    serial, s1 = run_suite(suite, cfg, _runner(_script(suite)), parallelism=1)
    parallel, s2 = run_suite(suite, cfg, _runner(_script(suite)), parallelism=4)
    assert [_strip(r) for r in serial] == [_strip(r) for r in parallel]
    assert s1.counts == s2.counts and s1.success_rate() == 1.0


def test_backend_error_keeps_denominator(tmp_path):
    suite = _suite(10)
    script = _script(suite)
    script["p4"] = []  # exhausted immediately
    path = tmp_path / "t.jsonl"
    with TraceSink(path, {"method": "repot"}) as sink:
        records, summary = run_suite(suite, MethodConfig("repot"), _runner(script), parallelism=3, sink=sink)
    assert len(records) == 10 and summary.n_exceptions == 1
    bad = records[4]
    assert bad.runner_exception == "script exhausted" and not bad.success and bad.n_calls == 1
    assert all(r.success for i, r in enumerate(records) if i != 4)
    header, back = read_traces(path)
    assert header["method"] == "repot" and len(back) == 10


def test_backend_error_during_repair_keeps_prefix(h4):
    r = _run("repot", h4, [_broken(h4, 6)])
    assert r.runner_exception == "script exhausted" and r.verified_prefix_len == 6
    assert r.n_calls == 2 and r.repot_repair_calls == 1


def test_empty_suite():
    records, summary = run_suite([], MethodConfig("pot"), _runner([]))
    assert records == [] and summary.n_records == 0 and summary.success_rate() is None


def test_crash_inside_method_becomes_record(h4):
    def boom(code):
        raise RuntimeError("executor exploded")

    runner = Runner(ScriptedBackend([pot_program(h4.oracle_plan)]), executor=boom)
    records, summary = run_suite([h4], MethodConfig("repot"), runner)
    assert records[0].runner_exception == "RuntimeError: executor exploded"
    assert records[0].repot_repair_calls == 0 and summary.n_exceptions == 1
