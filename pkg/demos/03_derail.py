"""Injected-error recovery: which feedback lets a planner get back on track?

Every case replays an oracle plan to a checkpoint, then forces one legal but
wrong move. Each condition gives the model a different view of what went
wrong. The scripted model here only knows how to continue the oracle plan,
and only from the checkpoint state, so it succeeds exactly when a condition
both shows it the checkpoint and resumes execution there.
"""

from __future__ import annotations

from repot.derail import make_cases, run_derail
from repot.envs import get_env
from repot.gateway import ScriptedBackend
from repot.methods import Runner
from repot.prompts import format_moves
from repot.zoo import StratificationPlan, generate_suite

suite = generate_suite(StratificationPlan({"hanoi": {4: 4}, "blocksworld": {5: 4}}), seed=3)
instances = {inst.problem_id: inst for inst in suite}
skipped: list = []
cases = make_cases(suite, seed=0, skipped=skipped)
by_case = {c.case_id: c for c in cases}
print(f"{len(cases)} cases, {len(skipped)} problems skipped (oracle plan too short)")

c = cases[0]
env = get_env(c.environment)
print(f"\nexample case {c.case_id}: checkpoint after {c.checkpoint_index} moves")
print("  checkpoint :", env.render_state(c.checkpoint_state))
print("  injected   :", c.injected_action)
print("  afterwards :", env.render_state(c.post_injection_state))


def policy(request, ordinal):
    case_id, condition = request.key.rsplit("/", 1)
    case = by_case[case_id]
    inst = instances[case.problem_id]
    if get_env(case.environment).render_state(case.checkpoint_state) not in request.prompt:
        return "moves = []"
    start = 0 if condition == "repot_restart" else case.checkpoint_index
    return "moves = " + format_moves(inst.oracle_plan[start:])


conditions = [
    "no_feedback",
    "error_only",
    "state_feedback",
    "state_plus_legal_actions",
    "repot_full",
    "repot_no_prefix",
    "repot_restart",
]
runner = Runner(ScriptedBackend(policy=policy), model_name="scripted")
records, summary = run_derail(cases, instances, conditions, runner)
print()
print(summary.table("scripted"))
print("\nall conditions paired on identical injections:", summary.paired)
