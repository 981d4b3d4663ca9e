from __future__ import annotations

import json
from collections import Counter

import pytest

from repot.envs import get_env
from repot.oracle import greedy_probe_from
from repot.replay import replay
from repot.zoo import (
    GenerationError,
    ProblemInstance,
    StratificationPlan,
    SuiteFormatError,
    dumps_instance,
    generate_instance,
    generate_suite,
    read_suite,
    write_suite,
)

from helpers import small_instance


def test_default_plan_counts(default_suite):
    assert StratificationPlan.default().total() == 775
    assert len(default_suite) == 775
    by_env = Counter(i.environment for i in default_suite)
    assert by_env == {"hanoi": 200, "checker": 225, "river": 100, "blocksworld": 250}
    strata = Counter((i.environment, i.complexity) for i in default_suite)
    assert set(strata.values()) == {25}


def test_every_oracle_plan_replays(default_suite):
    for inst in default_suite:
        out = replay(inst.environment, inst.initial_state, inst.oracle_plan, inst.goal)
        assert out.fully_valid and out.goal_reached, inst.problem_id
        assert inst.oracle_plan_length == len(inst.oracle_plan) > 0
        assert get_env(inst.environment).complexity(inst.initial_state) == inst.complexity


def test_low_strata_defeat_the_greedy_probe(default_suite):
    lowest = {"hanoi": (2, 3), "checker": (1, 2), "river": (1, 2), "blocksworld": (3, 4)}
    for inst in default_suite:
        if inst.complexity in lowest[inst.environment]:
            assert not greedy_probe_from(inst.environment, inst.initial_state, inst.goal, 100)


def test_ids_unique_and_stable(default_suite):
    ids = [i.problem_id for i in default_suite]
    assert len(set(ids)) == len(ids)
    assert ids[0] == "hanoi-c02-000"


def test_generation_is_byte_identical(tmp_path):
    plan = StratificationPlan({"hanoi": {3: 2}, "river": {2: 2}, "blocksworld": {5: 3}})
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_suite(generate_suite(plan, seed=11), a)
    write_suite(generate_suite(plan, seed=11), b)
    assert a.read_bytes() == b.read_bytes()
    write_suite(generate_suite(plan, seed=12), b)
    assert a.read_bytes() != b.read_bytes()


def test_instances_do_not_depend_on_plan_shape():
    small = generate_suite(StratificationPlan({"blocksworld": {6: 2}}), seed=3)
    big = generate_suite(StratificationPlan({"hanoi": {4: 1}, "blocksworld": {5: 1, 6: 4}}), seed=3)
    assert [dumps_instance(i) for i in small] == [dumps_instance(i) for i in big[2:4]]


def test_out_of_range_complexity():
    with pytest.raises(ValueError, match="outside the supported range"):
        generate_suite(StratificationPlan({"river": {5: 1}}))
    with pytest.raises(ValueError):
        generate_suite(StratificationPlan({"sokoban": {1: 1}}))


def test_exhausted_attempts_raise():
    with pytest.raises(GenerationError, match="no acceptable instance"):
        generate_instance("hanoi", 3, 0, 0, filter_trivial=False, max_attempts=0)


def test_jsonl_round_trip(tmp_path, default_suite):
    sample = default_suite[::60]
    path = tmp_path / "suite.jsonl"
    write_suite(sample, path)
    back = read_suite(path)
    assert [dumps_instance(i) for i in back] == [dumps_instance(i) for i in sample]
    row = json.loads(path.read_text().splitlines()[0])
    assert set(row) == {
        "problem_id", "environment", "complexity", "initial_state", "goal",
        "oracle_plan", "oracle_plan_length", "natural_language_prompt", "seed",
    }


def test_unknown_fields_survive_round_trip():
    row = small_instance().to_json()
    row["source"] = "planbench"
    inst = ProblemInstance.from_json(row)
    assert inst.extra == {"source": "planbench"}
    assert inst.to_json() == row


def test_truncated_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = dumps_instance(small_instance())
    path.write_text(good + "\n" + good[:40] + "\n")
    with pytest.raises(SuiteFormatError) as info:
        read_suite(path)
    assert info.value.line == 2


def test_missing_field_reports_line(tmp_path):
    row = small_instance().to_json()
    del row["goal"]
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(row) + "\n")
    with pytest.raises(SuiteFormatError, match="line 1"):
        read_suite(path)


def test_empty_file_is_an_empty_suite(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_suite(path) == []
