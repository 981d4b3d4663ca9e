"""Bring PDDL Blocksworld problems into the harness.

Writes a few problems in the style of PlanBench's four-operator Blocksworld
split, loads the directory, attaches reference plans and checks each one with
the harness's own Blocksworld verifier.
"""

from __future__ import annotations

import random
import tempfile
from pathlib import Path

from repot.planbench import attach_oracle, load_planbench_split, to_pddl
from repot.replay import replay
from repot.zoo import sample_blocksworld

rng = random.Random(0)
with tempfile.TemporaryDirectory() as tmp:
    split = Path(tmp)
    for i in range(5):
        state, goal = sample_blocksworld(rng.randint(3, 6), rng)
        (split / f"instance-{i + 1}.pddl").write_text(to_pddl(state, goal, f"bw-{i + 1}"))
    print((split / "instance-1.pddl").read_text())

    instances = attach_oracle(load_planbench_split(split))

for inst in instances:
    out = replay("blocksworld", inst.initial_state, inst.oracle_plan, inst.goal)
    print(f"{inst.problem_id}: {inst.complexity} blocks, reference plan {inst.oracle_plan_length} steps, verified={out.goal_reached}")

print("\nfirst problem's plan:", ", ".join(map(str, instances[0].oracle_plan)))
