from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repot import envs
from repot.envs import (
    ENV_IDS,
    ActionParseError,
    BlocksAction,
    BlocksGoal,
    BlocksState,
    CheckerState,
    EnvMismatchError,
    HanoiState,
    InvalidStateError,
    Move,
    RiverState,
    get_env,
)
from repot.envs.blocksworld import atom_text, parse_atom
from repot.envs.checker import Jump, Slide, successors
from repot.envs.river import Cross, unsafe_pair

from helpers import random_states


# -- Hanoi ---------------------------------------------------------------------------------


def test_hanoi_smallest_disk_moves():
    s = HanoiState.tower(3, 0)
    res = envs.step(s, Move(1, 0, 2))
    assert res.valid
    assert res.next_state.pegs == ((3, 2), (), (1,))


def test_hanoi_buried_disk_rejected_without_mutation():
    s = HanoiState.tower(3, 0)
    res = envs.step(s, Move(2, 0, 2))
    assert not res.valid
    assert res.error == "disk 2 is not the top disk of peg 0"
    assert res.next_state == s


@pytest.mark.parametrize(
    "action, message",
    [
        (Move(1, 0, 5), "peg 5 does not exist (pegs are 0, 1, 2)"),
        (Move(1, 0, 0), "source and target are both peg 0"),
        (Move(1, 1, 2), "peg 1 is empty"),
    ],
)
def test_hanoi_error_messages(action, message):
    res = envs.step(HanoiState.tower(2, 0), action)
    assert not res.valid and res.error == message


def test_hanoi_larger_on_smaller_rejected():
    s = HanoiState(((3, 2), (1,), ()))
    res = envs.step(s, Move(2, 0, 1))
    assert res.error == "cannot place disk 2 on smaller disk 1 (peg 1)"


def test_hanoi_goal_and_legal_actions():
    goal = HanoiState.tower(3, 2)
    assert envs.is_goal(HanoiState.tower(3, 2), goal)
    assert not envs.is_goal(HanoiState.tower(3, 0), goal)
    assert [str(a) for a in envs.legal_actions(HanoiState.tower(1, 0))] == ["move(1,0,1)", "move(1,0,2)"]


def test_hanoi_render():
    assert envs.render_state(HanoiState.tower(2, 0)) == "peg0: [2,1] peg1: [] peg2: []"


def test_hanoi_validate_rejects_bad_stacks():
    with pytest.raises(InvalidStateError):
        get_env("hanoi").validate_state(HanoiState(((1, 2), (), ())))
    with pytest.raises(InvalidStateError):
        get_env("hanoi").validate_state(HanoiState(((2, 1), (1,), ())))


# -- parsing --------------------------------------------------------------------------------


def test_parse_tolerates_spacing_and_case():
    assert envs.parse_action("hanoi", "move(1, 0, 2)") == Move(1, 0, 2)
    assert envs.parse_action("hanoi", "  MOVE( 1,0 ,2 ) ") == Move(1, 0, 2)
    assert envs.parse_action("blocksworld", "UNSTACK(a,b)") == BlocksAction("unstack", ("a", "b"))


def test_parse_arity_error_reports_position():
    with pytest.raises(ActionParseError) as info:
        envs.parse_action("hanoi", "move(1,0)")
    assert "arity" in str(info.value) or "argument" in str(info.value)


@pytest.mark.parametrize(
    "env, text",
    [
        ("hanoi", "move(a,0,1)"),
        ("hanoi", "move(1,0,2) extra"),
        ("hanoi", "jump(1,0,2)"),
        ("checker", "slide(1)"),
        ("river", "cross(up,[actor_1])"),
        ("blocksworld", "pick-up()"),
        ("blocksworld", "lift(a)"),
    ],
)
def test_parse_rejects(env, text):
    with pytest.raises(ActionParseError):
        envs.parse_action(env, text)


@pytest.mark.parametrize("env", ENV_IDS)
def test_canonical_text_round_trips(env):
    rng = random.Random(11)
    e = get_env(env)
    for s in random_states(env, rng, 50):
        for a in e.action_universe(s):
            assert e.parse_action(str(a)) == a


# -- Checker --------------------------------------------------------------------------------


def test_checker_start_and_moves():
    s = CheckerState.start(2)
    assert s.cells == "LL_RR"
    assert envs.legal_actions(s) == [Slide(1, 2), Slide(3, 2)]
    assert envs.render_state(s) == "cells 0..4: [L, L, _, R, R]"


def test_checker_jump_over_opponent_only():
    e = get_env("checker")
    s = CheckerState("LR_")
    res = e.step(s, Jump(0, 1, 2))
    assert res.valid and res.next_state.cells == "_RL"
    assert not e.step(CheckerState("LL_"), Jump(0, 1, 2)).valid


def test_checker_tokens_only_move_forward():
    e = get_env("checker")
    assert not e.step(CheckerState("_LR"), Slide(1, 0)).valid
    assert not e.step(CheckerState("RL_"), Slide(0, 1)).valid


def test_checker_successors_match_step():
    e = get_env("checker")
    for cells in ["LL_RR", "L_LRR", "LRL_R", "_LRLR"]:
        fast = {(t, n) for t, n in successors(cells)}
        slow = {(str(a), e.step(CheckerState(cells), a).next_state.cells) for a in e.legal_actions(CheckerState(cells))}
        assert fast == slow


def test_checker_conserves_tokens():
    rng = random.Random(5)
    for s in random_states("checker", rng, 300):
        assert s.cells.count("_") == 1
        assert s.cells.count("L") == s.cells.count("R")


# -- River ----------------------------------------------------------------------------------


def test_river_unsafe_pair_detection():
    assert unsafe_pair(["actor_1", "agent_2"]) == ("actor_1", "agent_2")
    assert unsafe_pair(["actor_1", "agent_1", "agent_2"]) is None
    assert unsafe_pair(["actor_1", "actor_2"]) is None


def test_river_crossing_rules():
    e = get_env("river")
    s = RiverState.all_on(2, "left")
    ok = e.step(s, Cross("right", ("actor_1", "agent_1")))
    assert ok.valid and ok.next_state.boat == "right"
    assert not e.step(s, Cross("left", ("actor_1",))).valid
    assert not e.step(s, Cross("right", ("actor_1", "agent_2"))).valid
    assert not e.step(s, Cross("right", ())).valid
    overfull = e.parse_action("cross(right,[actor_1,agent_1,actor_2])")
    assert not e.step(s, overfull).valid


def test_river_normalize_ignores_order():
    a = RiverState(2, ("agent_2", "actor_1", "agent_1", "actor_2"), (), "left")
    b = RiverState(2, ("actor_1", "agent_1", "actor_2", "agent_2"), (), "left")
    e = get_env("river")
    assert e.normalize(a) == e.normalize(b)
    assert e.render_state(e.normalize(a)) == e.render_state(b)


def test_river_states_stay_safe():
    rng = random.Random(9)
    for s in random_states("river", rng, 400):
        assert unsafe_pair(s.left) is None and unsafe_pair(s.right) is None
        assert sorted(s.left + s.right) == sorted(RiverState.all_on(s.n_pairs, "left").left)


# -- Blocksworld ----------------------------------------------------------------------------


def test_blocksworld_arm_busy():
    s = BlocksState.from_towers([["a"], ["b"]])
    held = envs.step(s, BlocksAction("pick-up", ("a",))).next_state
    res = envs.step(held, BlocksAction("pick-up", ("b",)))
    assert not res.valid and "arm is not empty" in res.error


def test_blocksworld_partial_goal():
    goal = BlocksGoal((("on", "a", "b"),))
    state = BlocksState((("arm_empty",), ("clear", "a"), ("on", "a", "b"), ("on_table", "b")))
    assert envs.is_goal(state, goal)


def test_blocksworld_single_block_actions():
    s = BlocksState((("on_table", "a"), ("clear", "a"), ("arm_empty",)))
    assert [str(a) for a in envs.legal_actions(s)] == ["pick-up(a)"]


def test_blocksworld_normalize_sorts_atoms():
    shuffled = BlocksState((("on_table", "b"), ("arm_empty",), ("clear", "a"), ("on", "a", "b")))
    n = envs.normalize(shuffled)
    assert list(n.atoms) == sorted(shuffled.atoms)
    assert envs.normalize(n) == n


@pytest.mark.parametrize(
    "atoms",
    [
        (("holding", "a"), ("arm_empty",)),
        (("on", "a", "b"), ("on", "c", "b"), ("on_table", "b"), ("clear", "a"), ("clear", "c"), ("arm_empty",)),
        (("on_table", "a"), ("arm_empty",)),
        (("on", "a", "b"), ("on", "b", "a"), ("arm_empty",)),
    ],
)
def test_blocksworld_invariant_violations(atoms):
    with pytest.raises(InvalidStateError):
        get_env("blocksworld").validate_state(BlocksState(atoms))


def test_atom_text_round_trip():
    for atom in [("on", "a", "b"), ("on_table", "c"), ("arm_empty",), ("holding", "d")]:
        assert parse_atom(atom_text(atom)) == atom


# -- cross-environment properties -----------------------------------------------------------


def test_env_mismatch_rejected():
    with pytest.raises(EnvMismatchError):
        get_env("hanoi").check_env(CheckerState.start(1))
    with pytest.raises(ValueError):
        get_env("sokoban")


@pytest.mark.parametrize("env", ENV_IDS)
def test_legal_actions_sound_and_complete(env):
    """a in legal_actions(s) exactly when step(s, a) is valid, on 1000 sampled states."""
    rng = random.Random(2024)
    e = get_env(env)
    for s in random_states(env, rng, 1000):
        legal = {str(a) for a in e.legal_actions(s)}
        for a in e.action_universe(s):
            res = e.step(s, a)
            assert res.valid == (str(a) in legal)
            if not res.valid:
                assert res.next_state == s and res.error
            else:
                e.validate_state(res.next_state)


@pytest.mark.parametrize("env", ENV_IDS)
def test_step_is_deterministic_and_normalize_idempotent(env):
    rng = random.Random(77)
    e = get_env(env)
    for s in random_states(env, rng, 200):
        assert e.normalize(e.normalize(s)) == e.normalize(s)
        for a in e.legal_actions(s)[:3]:
            assert e.step(s, a) == e.step(s, a)


@pytest.mark.parametrize("env", ENV_IDS)
def test_state_json_round_trip(env):
    rng = random.Random(3)
    e = get_env(env)
    for s in random_states(env, rng, 100):
        assert e.normalize(e.state_from_json(e.state_to_json(s))) == e.normalize(s)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(ENV_IDS))
def test_invalid_steps_never_mutate(seed, env):
    rng = random.Random(seed)
    e = get_env(env)
    s = random_states(env, rng, 1)[0]
    for a in e.action_universe(s):
        res = e.step(s, a)
        if not res.valid:
            assert res.next_state is s or res.next_state == s
