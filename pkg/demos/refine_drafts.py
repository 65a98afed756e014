"""Repairing hand-written draft models from execution feedback.

Every fixture ships one defective draft. The refiner reads the recorded
executions and either proposes a fixed model or leaves a note when it
cannot tell what went wrong.
"""

from btground.domains import fixture_names, load_bundled
from btground.grounding import GroundingConfig, GroundingProblem, cabto_ground
from btground.proposers import make_suite

for name in fixture_names():
    domain, taskset = load_bundled(name)
    env = domain.environment()
    problem = GroundingProblem(taskset.tasks, domain.model_space())
    report = cabto_ground(problem, env, make_suite("draft", env, domain.models), GroundingConfig(strict=True))
    print(f"== {name}: complete={report.complete} refinements={report.refinements} FC={report.feedback_cycles}")
    drafts = {m.name: m for m in domain.models}
    for a in report.system.actions:
        base = a.model.name.rstrip("'")
        if a.model.name != base and base in drafts:
            print(f"   draft  {drafts[base]}")
            print(f"   fixed  {a.model}")
    for note in report.notes:
        if "stale" in note or "flag" in note:
            print(f"   note   {note}")
