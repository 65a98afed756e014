"""Machine-readable results files.

A results file is one canonical JSON document (sorted keys, two-space
indent, trailing newline). Everything that depends on the wall clock sits
under the top-level ``timing`` key, so two runs with the same argv differ
only there, and not at all when timing is omitted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from ..errors import ParseError
from ..grounding import GroundingReport, ValidationRecord
from ..planner import PlanningContext, PlanResult, Task
from ..symbolic import ActionModel, DomainUniverse, StateSet
from ..system import BTSystem, GroundedAction
from .bttext import parse_bt, render_bt

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ResultsFile:
    """One grounding invocation: possibly several seeded runs on one task set."""

    universe: DomainUniverse
    domain: str
    taskset: str
    tasks: tuple[Task, ...]
    algorithm: str
    proposer: str
    config: Mapping[str, Any]
    runs: tuple[GroundingReport, ...]
    extra: Mapping[str, Any] = field(default_factory=dict)


def _state(s: StateSet) -> list[str]:
    return s.atoms()


def _model_rec(h: ActionModel) -> dict:
    return {"name": h.name, "pre": h.pre.atoms(), "add": h.add.atoms(), "del": h.delete.atoms()}


def _result_rec(r: PlanResult) -> dict:
    rec: dict[str, Any] = {"solved": r.solved, "expanded_condition_count": r.expanded_condition_count}
    if r.error is not None:
        rec["error"] = r.error
    if r.solution is not None:
        rec["bt"] = render_bt(r.solution)
    else:
        ctx = r.context
        rec["context"] = {
            "expanded_condition_count": ctx.expanded_condition_count,
            "frontier": [_state(c) for c in ctx.frontier],
            "sketch": render_bt(ctx.sketch),
            "actions_used": list(ctx.actions_used),
        }
    return rec


def _report_rec(r: GroundingReport) -> dict:
    return {
        "algorithm": r.algorithm,
        "seed": r.seed,
        "strict": r.strict,
        "k_trials": r.k_trials,
        "complete": r.complete,
        "feedback_cycles": r.feedback_cycles,
        "proposals_made": r.proposals_made,
        "policies_sampled": r.policies_sampled,
        "refinements": r.refinements,
        "rejected": r.rejected,
        "conditions": r.system.conditions.atoms(),
        "actions": [
            dict(_model_rec(a.model), policy=a.policy, validation_seed=a.seed) for a in r.system.actions
        ],
        "results": {tid: _result_rec(res) for tid, res in r.results.items()},
        "validations": [
            {
                "model": v.model,
                "key": list(v.key),
                "policy": v.policy,
                "seed": v.seed,
                "consistent": v.consistent,
                "cycle": v.cycle,
            }
            for v in r.validations
        ],
        "notes": list(r.notes),
    }


def results_to_record(rf: ResultsFile, timing: bool = True) -> dict:
    rec: dict[str, Any] = {
        "format": "btground-results",
        "version": FORMAT_VERSION,
        "universe": {"atoms": [str(p) for p in rf.universe.propositions], "objects": rf.universe.objects},
        "domain": rf.domain,
        "taskset": rf.taskset,
        "tasks": [{"id": t.id, "s0": _state(t.s0), "g": _state(t.g)} for t in rf.tasks],
        "algorithm": rf.algorithm,
        "proposer": rf.proposer,
        "config": dict(rf.config),
        "runs": [_report_rec(r) for r in rf.runs],
    }
    if rf.extra:
        rec["extra"] = dict(rf.extra)
    if timing:
        rec["timing"] = {"run_seconds": [r.duration for r in rf.runs]}
    return rec


def serialize_results(rf: ResultsFile, timing: bool = True) -> str:
    return json.dumps(results_to_record(rf, timing), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- parsing -------------------------------------------------------------------


def _need(rec: Mapping, key: str, source: str) -> Any:
    if key not in rec:
        raise ParseError(f"missing field {key!r}", source=source)
    return rec[key]


def _parse_state(u: DomainUniverse, atoms: Any, source: str) -> StateSet:
    try:
        return u.state(atoms)
    except Exception as err:  # unknown atom or bad syntax
        raise ParseError(f"bad state {atoms!r}: {err}", source=source) from None


def _parse_model(u: DomainUniverse, rec: Mapping, source: str) -> ActionModel:
    return ActionModel(
        _need(rec, "name", source),
        _parse_state(u, rec.get("pre", []), source),
        _parse_state(u, rec.get("add", []), source),
        _parse_state(u, rec.get("del", []), source),
    )


def _parse_result(u: DomainUniverse, tid: str, rec: Mapping, source: str) -> PlanResult:
    count = rec.get("expanded_condition_count", 0)
    if rec.get("solved"):
        return PlanResult(tid, solution=parse_bt(_need(rec, "bt", source), u, source), error=rec.get("error"),
                          expanded_condition_count=count)
    c = _need(rec, "context", source)
    ctx = PlanningContext(
        tid,
        False,
        c["expanded_condition_count"],
        tuple(_parse_state(u, f, source) for f in c["frontier"]),
        parse_bt(c["sketch"], u, source),
        tuple(c["actions_used"]),
    )
    return PlanResult(tid, context=ctx, error=rec.get("error"), expanded_condition_count=count)


def _parse_report(u: DomainUniverse, rec: Mapping, duration: float, source: str) -> GroundingReport:
    actions = tuple(
        GroundedAction(_parse_model(u, a, source), a["policy"], a.get("validation_seed")) for a in rec["actions"]
    )
    system = BTSystem(_parse_state(u, rec.get("conditions", []), source), actions)
    results = {tid: _parse_result(u, tid, r, source) for tid, r in _need(rec, "results", source).items()}
    validations = tuple(
        ValidationRecord(v["model"], tuple(v["key"]), v["policy"], v["seed"], v["consistent"], v["cycle"])
        for v in rec.get("validations", [])
    )
    return GroundingReport(
        rec["algorithm"],
        system,
        rec["complete"],
        results,
        feedback_cycles=rec.get("feedback_cycles", 0),
        proposals_made=rec.get("proposals_made", 0),
        policies_sampled=rec.get("policies_sampled", 0),
        refinements=rec.get("refinements", 0),
        rejected=rec.get("rejected", 0),
        duration=duration,
        seed=rec.get("seed", 0),
        strict=rec.get("strict", False),
        k_trials=rec.get("k_trials", 4),
        validations=validations,
        notes=tuple(rec.get("notes", [])),
    )


def parse_results(text: str, source: str = "<results>") -> ResultsFile:
    try:
        rec = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, err.lineno, err.colno, source) from None
    if not isinstance(rec, dict) or rec.get("format") != "btground-results":
        raise ParseError("not a btground results file", 1, 1, source)
    if rec.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported results version {rec.get('version')!r}", 1, 1, source)
    try:
        uni = _need(rec, "universe", source)
        u = DomainUniverse(uni["atoms"], uni.get("objects"))
        tasks = tuple(
            Task(t["id"], _parse_state(u, t["s0"], source), _parse_state(u, t["g"], source))
            for t in _need(rec, "tasks", source)
        )
        seconds = (rec.get("timing") or {}).get("run_seconds") or []
        runs = tuple(
            _parse_report(u, r, float(seconds[i]) if i < len(seconds) else 0.0, source)
            for i, r in enumerate(_need(rec, "runs", source))
        )
    except (KeyError, TypeError) as err:
        raise ParseError(f"malformed results record: {err}", source=source) from None
    return ResultsFile(
        u,
        rec.get("domain", ""),
        rec.get("taskset", ""),
        tasks,
        rec.get("algorithm", ""),
        rec.get("proposer", ""),
        rec.get("config", {}),
        runs,
        rec.get("extra", {}),
    )


def load_results(path) -> ResultsFile:
    with open(path, encoding="utf-8") as fh:
        return parse_results(fh.read(), str(path))


def write_results(path, rf: ResultsFile, timing: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_results(rf, timing))


def system_of(rf: ResultsFile, run: int = 0) -> Optional[BTSystem]:
    return rf.runs[run].system if rf.runs else None
