from __future__ import annotations

import random

import pytest

from repot.envs import BlocksAction, BlocksGoal, BlocksState, InvalidStateError, get_env
from repot.planbench import (
    PDDLError,
    SplitLoadError,
    attach_oracle,
    load_planbench_split,
    parse_pddl_problem,
    parse_sexpr,
    to_pddl,
)
from repot.replay import replay
from repot.zoo import sample_blocksworld

from helpers import pddl_apply, random_blocks_pairs, random_states

PLANBENCH_STYLE = """\
; generated problem, four blocks
(define (problem BW-rand-4)
(:domain blocksworld-4ops)
(:objects a b c d )
(:init
(handempty)
(ontable a)
(on b a)
(clear b)
(ontable c)
(on d c)
(clear d)
)
(:goal
(and
(on a d)
(on c b))
)
)
"""


def test_four_ops_match_independent_evaluator():
    mismatches = 0
    valid = 0
    for e, s, a in random_blocks_pairs(10_000, seed=99):
        expected = pddl_apply(set(s.atoms), a.op, a.args)
        res = e.step(s, a)
        valid += res.valid
        if (expected is None) != (not res.valid):
            mismatches += 1
        elif expected is not None and expected != set(res.next_state.atoms):
            mismatches += 1
    assert mismatches == 0
    assert 3000 < valid < 7000  # the sample exercises both branches


def test_pick_up_put_down_inverse():
    e = get_env("blocksworld")
    rng = random.Random(5)
    checked = 0
    for s in random_states("blocksworld", rng, 1000):
        for a in e.legal_actions(s):
            if a.op == "pick-up":
                t = e.step(s, a).next_state
                back = e.step(t, BlocksAction("put-down", a.args))
                assert back.valid and e.normalize(back.next_state) == e.normalize(s)
                checked += 1
            elif a.op == "put-down":
                t = e.step(s, a).next_state
                back = e.step(t, BlocksAction("pick-up", a.args))
                assert back.valid and e.normalize(back.next_state) == e.normalize(s)
                checked += 1
    assert checked > 500


def test_parse_planbench_style_file():
    inst = parse_pddl_problem(PLANBENCH_STYLE)
    assert inst.problem_id == "bw-rand-4" and inst.complexity == 4
    assert ("on_table", "a") in inst.initial_state.atoms and ("arm_empty",) in inst.initial_state.atoms
    assert set(inst.goal.atoms) == {("on", "a", "d"), ("on", "c", "b")}
    [solved] = attach_oracle([inst])
    out = replay("blocksworld", solved.initial_state, solved.oracle_plan, solved.goal)
    assert out.goal_reached and solved.oracle_plan_length == len(solved.oracle_plan)


def test_single_atom_goal_and_typed_objects():
    text = PLANBENCH_STYLE.replace("(:objects a b c d )", "(:objects a b c d - block)")
    text = text.replace("(and\n(on a d)\n(on c b))", "(on a d)")
    assert parse_pddl_problem(text).goal.atoms == (("on", "a", "d"),)


def _split_dir(tmp_path, n=12, seed=4):
    rng = random.Random(seed)
    d = tmp_path / "split"
    d.mkdir()
    for i in range(n):
        s, g = sample_blocksworld(4, rng)
        (d / f"instance-{i + 1:02d}.pddl").write_text(to_pddl(s, g, f"bw-{i}"))
    (d / "instance-99.pddl").write_text(PLANBENCH_STYLE)
    return d


def test_load_split_directory(tmp_path):
    d = _split_dir(tmp_path)
    instances = attach_oracle(load_planbench_split(d))
    assert [i.problem_id for i in instances][:2] == ["instance-01", "instance-02"]
    assert len(instances) == 13
    for inst in instances:
        assert inst.complexity == 4
        out = replay("blocksworld", inst.initial_state, inst.oracle_plan, inst.goal)
        assert out.fully_valid and out.goal_reached


def test_to_pddl_round_trip():
    rng = random.Random(8)
    for _ in range(50):
        s, g = sample_blocksworld(5, rng)
        inst = parse_pddl_problem(to_pddl(s, g))
        assert inst.initial_state == s and set(inst.goal.atoms) == set(g.atoms)


def test_split_errors_are_aggregated(tmp_path):
    d = _split_dir(tmp_path, n=2)
    (d / "bad-1.pddl").write_text("(define (problem x) (:init (ontable a) (clear a) (handempty))")
    (d / "bad-2.pddl").write_text(PLANBENCH_STYLE.replace("(on b a)", "(on b a) (on b c)"))
    with pytest.raises(SplitLoadError) as info:
        load_planbench_split(d)
    names = [p.rsplit("/", 1)[1] for p, _ in info.value.errors]
    assert names == ["bad-1.pddl", "bad-2.pddl"]
    assert "2 file(s) failed" in str(info.value)


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("(define (problem x)", "unbalanced"),
        ("(define (problem x)) extra", "trailing"),
        (PLANBENCH_STYLE.replace("(clear b)", "(sparkly b)"), "unknown predicate"),
        (PLANBENCH_STYLE.replace("(on a d)", "(on a z)"), "undeclared"),
        (PLANBENCH_STYLE.replace("(:init", "(:initial"), "unsupported section"),
        (PLANBENCH_STYLE.replace("(on b a)", "(on b)"), "argument"),
    ],
)
def test_parse_errors(text, match):
    with pytest.raises(PDDLError, match=match):
        parse_pddl_problem(text)


def test_object_without_position():
    with pytest.raises(InvalidStateError, match="no position"):
        parse_pddl_problem(PLANBENCH_STYLE.replace("(:objects a b c d )", "(:objects a b c d e)"))


def test_unreachable_goal_detected():
    inst = parse_pddl_problem(PLANBENCH_STYLE.replace("(on c b))", "(on c b) (on d b))"))
    with pytest.raises(PDDLError, match="unreachable"):
        attach_oracle([inst])


def test_comments_are_ignored():
    assert parse_sexpr("(a ; (b\n c)") == ["a", "c"]


def test_missing_directory(tmp_path):
    with pytest.raises(NotADirectoryError):
        load_planbench_split(tmp_path / "nope")


def test_goal_type():
    assert isinstance(parse_pddl_problem(PLANBENCH_STYLE).goal, BlocksGoal)
    assert isinstance(parse_pddl_problem(PLANBENCH_STYLE).initial_state, BlocksState)
