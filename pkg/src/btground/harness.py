"""Seeded multi-run helpers and the with/without-context comparison."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

from .env import SimEnvironment
from .grounding import (
    GroundingConfig,
    GroundingProblem,
    GroundingReport,
    Metrics,
    TaskAttributes,
    cabto_ground,
    compute_metrics,
    naive_report,
)
from .io.domain import DomainFile, TaskSetFile
from .io.results import ResultsFile
from .proposers import make_suite
from .symbolic import ActionModel


def ground_runs(
    problem: GroundingProblem,
    env: SimEnvironment,
    algorithm: str = "cabto",
    proposer: str = "heuristic",
    cfg: GroundingConfig = GroundingConfig(),
    runs: int = 1,
    drafts: Sequence[ActionModel] = (),
) -> tuple[GroundingReport, ...]:
    """``runs`` independent runs with master seeds ``cfg.seed, cfg.seed+1, ...``.

    A fresh proposer suite is built for every run so no state leaks between
    seeds.
    """
    out = []
    for i in range(runs):
        c = dataclasses.replace(cfg, seed=cfg.seed + i)
        if algorithm == "naive":
            out.append(naive_report(problem, env, c))
        elif algorithm == "cabto":
            suite = make_suite(proposer, env, drafts)
            try:
                out.append(cabto_ground(problem, env, suite, c))
            finally:
                close = getattr(suite.proposer, "close", None)
                if close is not None:
                    close()
        else:
            raise ValueError(f"unknown algorithm {algorithm!r}")
    return tuple(out)


def ground_file(
    domain: DomainFile,
    taskset: TaskSetFile,
    algorithm: str = "cabto",
    proposer: str = "heuristic",
    cfg: GroundingConfig = GroundingConfig(),
    runs: int = 1,
) -> ResultsFile:
    env = domain.environment()
    problem = GroundingProblem(taskset.tasks, domain.model_space())
    reports = ground_runs(problem, env, algorithm, proposer, cfg, runs, domain.models)
    config = dict(cfg.to_record(), runs=runs)
    return ResultsFile(
        domain.universe,
        domain.name,
        taskset.name,
        taskset.tasks,
        algorithm,
        proposer if algorithm == "cabto" else "none",
        config,
        reports,
    )


@dataclass(frozen=True)
class AblationRow:
    name: str
    without: Metrics
    with_: Metrics

    @property
    def csr_gain(self) -> float:
        return self.with_.csr - self.without.csr


def ablation(
    name: str,
    domain: DomainFile,
    taskset: TaskSetFile,
    proposer: str = "heuristic",
    cfg: GroundingConfig = GroundingConfig(strict=True),
    runs: int = 10,
    context: str = "planning",
) -> AblationRow:
    """Same seeds with and without one kind of feedback context."""
    flag = {"planning": "ablate_planning_contexts", "execution": "ablate_execution_contexts"}[context]
    env = domain.environment()
    problem = GroundingProblem(taskset.tasks, domain.model_space())
    rows = []
    for ablate in (True, False):
        c = dataclasses.replace(cfg, **{flag: ablate})
        reports = ground_runs(problem, env, "cabto", proposer, c, runs, domain.models)
        rows.append(compute_metrics(reports, taskset.tasks))
    return AblationRow(name, rows[0], rows[1])


def _pct(x: float) -> str:
    return f"{100 * x:.1f}"


def format_table(rows: Sequence[tuple[str, Metrics, Optional[Metrics]]]) -> str:
    """Plain-text table, one row per task set; ``w/o -> w`` when a pair is given."""
    header = ("Task set", "Runs", "ASR(w/o → w)", "CSR(w/o → w)", "FC")
    body = []
    for name, a, b in rows:
        if b is None:
            body.append((name, str(a.runs), _pct(a.asr), _pct(a.csr), f"{a.fc:.1f}"))
        else:
            body.append(
                (
                    name,
                    str(b.runs),
                    f"{_pct(a.asr)} → {_pct(b.asr)}",
                    f"{_pct(a.csr)} → {_pct(b.csr)}",
                    f"{b.fc:.1f}",
                )
            )
    return _columns(header, body)


def format_attributes(rows: Sequence[tuple[str, Optional[TaskAttributes]]]) -> str:
    """Acts/Conds/Steps per task set; ``-`` where nothing was solved."""
    header = ("Task set", "Acts", "Conds", "Steps")
    body = []
    for name, a in rows:
        if a is None or not a.solved:
            body.append((name, "-", "-", "-"))
        else:
            body.append((name, f"{a.acts:.1f}", f"{a.conds:.1f}", f"{a.steps:.1f}"))
    return _columns(header, body)


def mean_attributes(attrs: Sequence[TaskAttributes]) -> Optional[TaskAttributes]:
    """Average of per-run attributes over the runs that solved anything."""
    solved = [a for a in attrs if a.solved]
    if not solved:
        return None
    k = len(solved)
    return TaskAttributes(
        sum(a.acts for a in solved) / k,
        sum(a.conds for a in solved) / k,
        sum(a.steps for a in solved) / k,
        sum(a.solved for a in solved),
    )


def _columns(header: tuple[str, ...], body: list[tuple[str, ...]]) -> str:
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines)
