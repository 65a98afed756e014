"""BT grounding: the exhaustive baseline, the CABTO loop, verdicts and metrics.

The grounding code never reads hidden policy transitions. It talks to the
environment through :meth:`SimEnvironment.catalog` and
:meth:`SimEnvironment.validate_consistency` only, so running it under
:func:`btground.env.redact_hidden` must not raise.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .env import ExecutionContext, SimEnvironment, derive_seed
from .errors import DomainError, ResourceError, UnsatisfiableScenarioError
from .modelspace import Key, ModelSpace
from .planner import (
    PlannerConfig,
    PlanningContext,
    PlanResult,
    Task,
    failed_contexts,
    plan_all,
    simulate,
    verify_solution,
)
from .proposers.base import ProposalInput, ProposerSuite, RefineInput, SampleInput
from .proposers.builtin import HeuristicSampler
from .symbolic import Action, ActionModel, Condition, DomainUniverse, iter_nodes
from .system import BTSystem, GroundedAction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundingProblem:
    """``<P, C_P, H_P, Pi_P>`` minus the policies, which the environment owns."""

    tasks: tuple[Task, ...]
    space: ModelSpace

    def __post_init__(self) -> None:
        u = self.space.universe
        for t in self.tasks:
            if t.s0.universe != u:
                raise DomainError(f"task {t.id} is not over the problem's universe")
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate task ids")

    @property
    def universe(self) -> DomainUniverse:
        return self.space.universe


@dataclass(frozen=True)
class GroundingConfig:
    seed: int = 0
    k_trials: int = 4
    nmax: int = 3
    max_cycles: int = 3
    batch: int = 8
    strict: bool = False
    ablate_planning_contexts: bool = False
    ablate_execution_contexts: bool = False
    max_proposal_rounds: int = 8
    refine_depth: int = 3
    naive_cap: int = 10**7
    planner: PlannerConfig = field(default_factory=PlannerConfig)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["planner"] = {"max_expansions": self.planner.max_expansions}
        return rec


@dataclass(frozen=True)
class ValidationRecord:
    model: str
    key: Key
    policy: str
    seed: int
    consistent: bool
    cycle: int


@dataclass(frozen=True)
class GroundingReport:
    algorithm: str
    system: BTSystem
    complete: bool
    results: Mapping[str, PlanResult]
    feedback_cycles: int = 0
    proposals_made: int = 0
    policies_sampled: int = 0
    refinements: int = 0
    rejected: int = 0
    duration: float = 0.0
    seed: int = 0
    strict: bool = False
    k_trials: int = 4
    validations: tuple[ValidationRecord, ...] = ()
    notes: tuple[str, ...] = ()

    @property
    def solved_tasks(self) -> tuple[str, ...]:
        return tuple(tid for tid, r in self.results.items() if r.solved)


# -- verdicts ------------------------------------------------------------------


def all_solvable(
    tasks: Sequence[Task], actions: Iterable[GroundedAction], cfg: PlannerConfig = PlannerConfig()
) -> bool:
    """Every task plans with the actions' models and every plan verifies."""
    models = [a.model for a in actions]
    results = plan_all(tasks, models, cfg)
    by_id = {t.id: t for t in tasks}
    return all(r.solved and verify_solution(r.solution, by_id[tid], models) for tid, r in results.items())


def _verdict(
    tasks: Sequence[Task], system: BTSystem, cfg: PlannerConfig
) -> tuple[bool, dict[str, PlanResult]]:
    models = system.models
    results = plan_all(tasks, models, cfg)
    by_id = {t.id: t for t in tasks}
    complete = all(r.solved and verify_solution(r.solution, by_id[tid], models) for tid, r in results.items())
    return complete, results


def revalidate(env: SimEnvironment, report: GroundingReport) -> list[str]:
    """Replay each grounded action's recorded validation; returns the names that fail."""
    bad = []
    for a in report.system.actions:
        ok, _ = env.validate_consistency(a.model, a.policy, report.k_trials, a.seed, report.strict)
        if not ok:
            bad.append(a.name)
    return bad


# -- naive ---------------------------------------------------------------------


def _validation_seed(cfg: GroundingConfig, key: Key, pid: str, retry: int) -> int:
    return derive_seed(cfg.seed, "validate", key, pid, retry)


def naive_ground(
    problem: GroundingProblem, env: SimEnvironment, cfg: GroundingConfig = GroundingConfig()
) -> BTSystem:
    """Enumerate every valid model and keep the first policy consistent with it."""
    space = problem.space
    count = space.candidate_count() if space.explicit is None else space.size()
    if count > cfg.naive_cap:
        raise ResourceError(
            f"naive grounding would enumerate {count} candidate models (cap {cfg.naive_cap})", context=count
        )
    catalog = [pid for pid, _ in env.catalog()]
    actions = []
    if catalog:
        for h in space.iter_models():
            for pid in catalog:
                seed = _validation_seed(cfg, h.key, pid, 0)
                try:
                    ok, _ = env.validate_consistency(h, pid, cfg.k_trials, seed, cfg.strict)
                except UnsatisfiableScenarioError:
                    break
                if ok:
                    actions.append(GroundedAction(h, pid, seed))
                    break
    return BTSystem.from_actions(problem.universe, actions)


def naive_report(
    problem: GroundingProblem, env: SimEnvironment, cfg: GroundingConfig = GroundingConfig()
) -> GroundingReport:
    start = time.perf_counter()
    system = naive_ground(problem, env, cfg)
    complete, results = _verdict(problem.tasks, system, cfg.planner)
    return GroundingReport(
        "naive",
        system,
        complete,
        results,
        duration=time.perf_counter() - start,
        seed=cfg.seed,
        strict=cfg.strict,
        k_trials=cfg.k_trials,
    )


# -- CABTO ---------------------------------------------------------------------


class _Loop:
    """Mutable state of one CABTO run; one instance per call."""

    def __init__(self, problem: GroundingProblem, env: SimEnvironment, suite: ProposerSuite, cfg: GroundingConfig):
        self.problem = problem
        self.env = env
        self.suite = suite
        self.cfg = cfg
        self.catalog = tuple(env.catalog())
        self.catalog_ids = {pid for pid, _ in self.catalog}
        self.fallback_sampler = HeuristicSampler()
        self.actions: list[GroundedAction] = []
        self.validated: dict[Key, ActionModel] = {}  # H
        self.explore: dict[Key, ActionModel] = {}  # H_E
        self.explored: set[Key] = set()  # H_P minus H_U
        self.names: dict[str, Key] = {}
        self.history: dict[Key, list[ExecutionContext]] = {}
        self.depth: dict[Key, int] = {}
        self.retries: dict[tuple[Key, str], int] = {}
        self.failures: tuple[PlanningContext, ...] = ()
        self.validations: list[ValidationRecord] = []
        self.notes: list[str] = []
        self.proposals = self.sampled = self.refinements = self.rejected = 0
        self.cycle = 0
        self.round = 0
        self.space_size = problem.space.size()

    # H_U is tracked by exclusion: it is empty once everything was explored
    def hu_empty(self) -> bool:
        return len(self.explored) >= self.space_size

    def note(self, msg: str) -> None:
        log.info("cabto: %s", msg)
        self.notes.append(f"cycle {self.cycle}: {msg}")

    def gate(self, models: Iterable[ActionModel]) -> list[ActionModel]:
        """Schema gate: drop invalid, explored and duplicate models; rename name clashes."""
        u = self.problem.universe
        accepted: list[ActionModel] = []
        batch: set[Key] = set()
        for h in models:
            if not isinstance(h, ActionModel) or h.universe != u:
                self.rejected += 1
                self.note("rejected a proposal over a foreign universe")
                continue
            if not self.problem.space.is_valid(h.key):
                self.rejected += 1
                self.note(f"rejected invalid model {h}")
                continue
            if h.key in batch:
                continue
            if h.key in self.explored:
                self.rejected += 1
                self.note(f"rejected already explored model {h.name}")
                continue
            name = h.name
            k = 2
            while name in self.names and self.names[name] != h.key or any(
                m.name == name for m in accepted
            ):
                name = f"{h.name}_{k}"
                k += 1
            if name != h.name:
                h = h.renamed(name)
            batch.add(h.key)
            accepted.append(h)
        return accepted

    def admit(self, h: ActionModel, depth: int = 0) -> None:
        self.explored.add(h.key)
        self.explore[h.key] = h
        self.names[h.name] = h.key
        self.history.setdefault(h.key, [])
        self.depth.setdefault(h.key, depth)

    def propose(self, phase: str, failures: Optional[tuple[PlanningContext, ...]]) -> list[ActionModel]:
        cfg = self.cfg
        if cfg.ablate_planning_contexts:
            failures = None
        accepted: list[ActionModel] = []
        for attempt in range(2):  # one re-query after a fully rejected answer
            inp = ProposalInput(
                phase=phase,
                tasks=self.problem.tasks,
                space=self.problem.space,
                explored=frozenset(self.explored),
                known=tuple(self.explore.values()),
                failures=failures,
                catalog=self.catalog,
                batch=cfg.batch,
                seed=derive_seed(cfg.seed, "propose"),
                round=self.round,
            )
            self.round += 1
            before = self.rejected
            raw = list(self.suite.proposer.propose(inp))
            accepted = self.gate(raw[: max(cfg.batch, len(raw))])
            if accepted or self.rejected == before:
                break
        for h in accepted:
            self.admit(h)
        self.proposals += len(accepted)
        return accepted

    def sample(self, h: ActionModel, tried: list[str], attempt: int) -> tuple[str, dict]:
        inp = SampleInput(
            model=h,
            catalog=self.catalog,
            tried=tuple(tried),
            history=None if self.cfg.ablate_execution_contexts else tuple(self.history[h.key]),
            attempt=attempt,
            seed=derive_seed(self.cfg.seed, "sample"),
        )
        choice = self.suite.sampler.sample(inp)
        if choice.policy_id not in self.catalog_ids:
            self.rejected += 1
            self.note(f"sampler returned unknown policy {choice.policy_id!r}; using the built-in sampler")
            choice = self.fallback_sampler.sample(inp)
        return choice.policy_id, dict(choice.params)

    def validate(self, h: ActionModel) -> tuple[bool, list[str]]:
        cfg = self.cfg
        tried: list[str] = []
        for n in range(cfg.nmax):
            pid, params = self.sample(h, tried, n)
            self.sampled += 1
            retry = self.retries.get((h.key, pid), 0)
            self.retries[(h.key, pid)] = retry + 1
            seed = _validation_seed(cfg, h.key, pid, retry)
            try:
                ok, ctxs = self.env.validate_consistency(
                    h, pid, cfg.k_trials, seed, cfg.strict, attempt=n, params=params
                )
            except UnsatisfiableScenarioError as err:
                self.note(f"{h.name}: {err}")
                return False, tried
            self.history[h.key].extend(ctxs)
            self.validations.append(ValidationRecord(h.name, h.key, pid, seed, ok, self.cycle))
            tried.append(pid)
            if ok:
                self.actions.append(GroundedAction(h, pid, seed))
                self.validated[h.key] = h
                return True, tried
        return False, tried

    def refine(self, h: ActionModel, tried: list[str]) -> Optional[ActionModel]:
        cfg = self.cfg
        inp = RefineInput(
            model=h,
            space=self.problem.space,
            explored=frozenset(self.explored),
            catalog=self.catalog,
            tasks=self.problem.tasks,
            failures=None if cfg.ablate_planning_contexts else self.failures,
            history=None if cfg.ablate_execution_contexts else tuple(self.history[h.key]),
            tried=tuple(tried),
            seed=derive_seed(cfg.seed, "refine"),
        )
        ref = self.suite.refiner.refine(inp)
        for n in ref.notes:
            self.note(f"refine {h.name}: {n}")
        if ref.model is None:
            return None
        if ref.model.key == h.key:
            self.note(f"refine {h.name}: refiner returned the model unchanged")
            return None
        accepted = self.gate([ref.model])
        if not accepted:
            return None
        h2 = accepted[0]
        self.admit(h2, self.depth[h.key] + 1)
        self.history[h2.key] = list(self.history[h.key])  # inherit I_e
        self.refinements += 1
        return h2

    def solvable(self) -> bool:
        return all_solvable(self.problem.tasks, self.actions, self.cfg.planner)

    def run(self) -> int:
        cfg = self.cfg
        tasks = self.problem.tasks
        if tasks and not self.hu_empty():
            self.propose("initial_proposal", None)
        iterations = 0
        while not self.hu_empty() and not self.solvable():
            if iterations > cfg.max_cycles:
                self.note(f"stopped after {cfg.max_cycles} feedback cycles")
                break
            self.cycle = iterations
            iterations += 1
            # high-level model proposal
            rounds = 0
            while True:
                results = plan_all(tasks, list(self.explore.values()), cfg.planner)
                self.failures = tuple(failed_contexts(results))
                if not self.failures or self.hu_empty() or rounds >= cfg.max_proposal_rounds:
                    break
                rounds += 1
                if not self.propose("repair_proposal", self.failures):
                    break
            # low-level policy sampling, then cross-level refinement
            work = [h for k, h in self.explore.items() if k not in self.validated]
            i = 0
            while i < len(work):
                h = work[i]
                i += 1
                ok, tried = self.validate(h)
                if not ok and self.depth[h.key] < cfg.refine_depth:
                    h2 = self.refine(h, tried)
                    if h2 is not None:
                        work.append(h2)
            # knowledge sync
            self.explore = dict(self.validated)
            self.names = {h.name: k for k, h in self.validated.items()}
        return iterations


def cabto_ground(
    problem: GroundingProblem,
    env: SimEnvironment,
    suite: ProposerSuite,
    cfg: GroundingConfig = GroundingConfig(),
) -> GroundingReport:
    start = time.perf_counter()
    loop = _Loop(problem, env, suite, cfg)
    iterations = loop.run()
    system = BTSystem.from_actions(problem.universe, loop.actions)
    complete, results = _verdict(problem.tasks, system, cfg.planner)
    return GroundingReport(
        "cabto",
        system,
        complete,
        results,
        feedback_cycles=max(iterations - 1, 0),
        proposals_made=loop.proposals,
        policies_sampled=loop.sampled,
        refinements=loop.refinements,
        rejected=loop.rejected,
        duration=time.perf_counter() - start,
        seed=cfg.seed,
        strict=cfg.strict,
        k_trials=cfg.k_trials,
        validations=tuple(loop.validations),
        notes=tuple(loop.notes),
    )


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    asr: float
    csr: float
    fc: float
    runs: int


def compute_metrics(runs: Sequence[GroundingReport], tasks: Sequence[Task]) -> Metrics:
    """ASR, CSR and FC over repeated runs on one task set."""
    if not runs:
        raise DomainError("metrics need at least one run")
    ids = [t.id for t in tasks]
    rates = []
    full = 0
    for r in runs:
        solved = sum(1 for tid in ids if tid in r.results and r.results[tid].solved)
        rates.append(solved / len(ids) if ids else 1.0)
        full += solved == len(ids)
    return Metrics(
        asr=sum(rates) / len(runs),
        csr=full / len(runs),
        fc=sum(r.feedback_cycles for r in runs) / len(runs),
        runs=len(runs),
    )


_AUTO_NAME = re.compile(r"[mg](_\d+)+'*$")


def action_predicate(name: str) -> str:
    """Verb part of an action name: ``pick_cloth`` and ``pick_lid`` share ``pick``.

    Generated names such as ``m_3_4_1`` have no verb and count on their own.
    """
    if _AUTO_NAME.match(name):
        return name.rstrip("'")
    return re.split(r"[_(']", name, maxsplit=1)[0] or name


@dataclass(frozen=True)
class TaskAttributes:
    """Per-task averages over solved tasks: distinct action predicates, distinct
    condition predicates and executed steps of each solution."""

    acts: float
    conds: float
    steps: float
    solved: int


def task_attributes(tasks: Sequence[Task], results: Mapping[str, PlanResult], models: Sequence[ActionModel]) -> TaskAttributes:
    acts = conds = steps = 0
    solved = 0
    for t in tasks:
        r = results.get(t.id)
        if r is None or not r.solved:
            continue
        solved += 1
        nodes = list(iter_nodes(r.solution))
        acts += len({action_predicate(n.name) for n in nodes if isinstance(n, Action)})
        conds += len({p.predicate for n in nodes if isinstance(n, Condition) for p in n.condition})
        _, trace = simulate(r.solution, t, models)
        steps += len(trace) - 1
    if not solved:
        return TaskAttributes(0.0, 0.0, 0.0, 0)
    return TaskAttributes(acts / solved, conds / solved, steps / solved, solved)
