"""Ground the drawer task set twice and execute the result.

The naive search validates every candidate model against every policy. The
feedback loop gets the same answer from a handful of proposals. Run with
``python demos/drawer_walkthrough.py``.
"""

import time

from btground.domains import load_bundled
from btground.grounding import GroundingConfig, GroundingProblem, cabto_ground, naive_report
from btground.io import render_bt
from btground.planner import bt_expansion
from btground.proposers import make_suite

domain, taskset = load_bundled("drawer")
env = domain.environment()
problem = GroundingProblem(taskset.tasks, domain.model_space())
print(f"{domain.universe.n} atoms, {problem.space.size()} valid models, {len(env.catalog())} policies")

t = time.perf_counter()
naive = naive_report(problem, env)
print(f"\nnaive: {len(naive.system.actions)} grounded actions in {time.perf_counter() - t:.2f}s")

t = time.perf_counter()
loop = cabto_ground(problem, env, make_suite("heuristic", env), GroundingConfig(strict=True))
print(f"feedback loop: {len(loop.system.actions)} grounded actions in {time.perf_counter() - t:.2f}s,"
      f" {loop.proposals_made} proposals, {loop.feedback_cycles} feedback cycle(s)")
for a in loop.system.actions:
    print(f"  {a.model}  ->  {a.policy}")

task = next(t for t in taskset.tasks if t.id == "stow")
tree = bt_expansion(task, loop.system.models).solution
print(f"\nBT for {task.id}:\n{render_bt(tree)}")

trace = env.execute_bt(tree, task.s0, loop.system.bindings(), seed=0)
for step in trace.steps:
    what = f"{step.action} via {step.policy}" if step.action else step.status
    print(f"  tick {step.tick}: {what:32s} {', '.join(step.state.atoms())}")
print("goal reached" if trace.succeeded else "goal missed")
