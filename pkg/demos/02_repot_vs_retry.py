"""RePoT keeps the verified prefix; PoT-retry throws it away.

A scripted backend plays the model. Its first answer for every problem is
the oracle plan with one bad move in the middle. The second answer is
whatever is asked for: RePoT's repair prompt shows the checkpoint state, so
the scripted model continues from there, while a blind retry gets the same
broken plan again. Both methods get the same call budget.
"""

from __future__ import annotations

from repot.gateway import ScriptedBackend
from repot.methods import MethodConfig, Runner, run_suite
from repot.prompts import format_moves
from repot.replay import replay
from repot.zoo import StratificationPlan, generate_suite

suite = generate_suite(StratificationPlan({"hanoi": {4: 3}, "river": {3: 3}}), seed=5)
by_id = {inst.problem_id: inst for inst in suite}


def broken(inst):
    """Oracle plan with the middle action replaced by a repeat of the first."""
    plan = list(inst.oracle_plan)
    mid = len(plan) // 2
    plan[mid] = plan[0]
    return plan, mid


def policy(request, ordinal):
    inst = by_id[request.key]
    plan, mid = broken(inst)
    if ordinal == 0 or "Current verified state" not in request.prompt:
        return "moves = " + format_moves(plan)
    # Repair: continue from the boundary the harness reported.
    out = replay(inst.environment, inst.initial_state, plan[:mid], inst.goal)
    assert out.fully_valid
    return "moves = " + format_moves(inst.oracle_plan[mid:])


for method in ("pot", "pot_retry", "repot"):
    runner = Runner(ScriptedBackend(policy=policy), model_name="scripted")
    records, _ = run_suite(suite, MethodConfig(method), runner)
    solved = sum(r.success for r in records)
    calls = sum(r.n_calls for r in records)
    print(f"{method:<10} solved {solved}/{len(records)}  model calls {calls}")

print()
r = records[0]
print("one repot trace:", r.problem_id)
for a in r.attempts:
    print(f"  {a.kind:<8} plan_len={a.plan_len:<3} verified={a.verified_prefix_len:<3} goal={a.goal_reached}")
