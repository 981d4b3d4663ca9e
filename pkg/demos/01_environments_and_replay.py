"""Walk a plan through an environment and find where it breaks.

Builds a small Tower of Hanoi problem, solves it with the oracle, then
corrupts one move and shows what verified replay reports: the longest valid
prefix, the state it reaches and the rule that the next move breaks.
"""

from __future__ import annotations

from repot.envs import get_env
from repot.envs.hanoi import HanoiState, Move
from repot.oracle import solve_from
from repot.replay import replay

env = get_env("hanoi")
start = HanoiState.tower(3, peg=0)
goal = HanoiState.tower(3, peg=2)
print("start:", env.render_state(start))

plan = solve_from("hanoi", start, goal)
print(f"oracle plan ({len(plan)} moves):", ", ".join(map(str, plan)))

out = replay("hanoi", start, plan, goal)
print("oracle replay reaches the goal:", out.goal_reached)

# Swap the third move for one that moves a disk which is no longer on top.
broken = list(plan)
broken[2] = Move(2, 0, 2)
out = replay("hanoi", start, broken, goal)
print()
print("corrupted plan")
print("  failure index :", out.failure_index)
print("  verified moves:", ", ".join(map(str, out.prefix)))
print("  boundary state:", env.render_state(out.boundary_state))
print("  error         :", out.error)

# Model output is text; unparseable entries count as invalid transitions.
out = replay("hanoi", start, ["move(1,0,2)", "teleport(3)"], goal)
print()
print("text plan with junk -> k =", out.failure_index, "|", out.error)
