"""BT Expansion planner, its forward-search oracle, and closed-loop verification.

The planner regresses the goal backwards. Every accepted regression
``c' = (c - add) | pre`` becomes one ``Sequence(Condition(c'), Action(h))``
branch under a single root Fallback whose first child is the goal condition.
Branches are appended in breadth-first order, so whichever branch fires
first in a state is never deeper than the one that made progress before it,
and execution walks monotonically towards the goal.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import DomainError, ResourceError
from .symbolic import (
    Action,
    ActionModel,
    BTNode,
    Condition,
    Fallback,
    Sequence,
    StateSet,
    Status,
    _tick,
    action_names,
    check_actions,
    iter_nodes,
)

log = logging.getLogger(__name__)

ORACLE_MAX_N = 20


@dataclass(frozen=True)
class Task:
    id: str
    s0: StateSet
    g: StateSet

    def __post_init__(self) -> None:
        if self.s0.universe is not self.g.universe and self.s0.universe != self.g.universe:
            raise DomainError(f"task {self.id}: s0 and g span different universes")


@dataclass(frozen=True)
class PlanningContext:
    """Diagnostics for one task: the sketch built so far and where it got stuck."""

    task_id: str
    solved: bool
    expanded_condition_count: int
    frontier: tuple[StateSet, ...]
    sketch: BTNode
    actions_used: tuple[str, ...]


@dataclass(frozen=True)
class PlanResult:
    task_id: str
    solution: Optional[BTNode] = None
    context: Optional[PlanningContext] = None
    error: Optional[str] = None
    expanded_condition_count: int = 0

    def __post_init__(self) -> None:
        if (self.solution is None) == (self.context is None):
            raise ValueError("exactly one of solution/context must be set")

    @property
    def solved(self) -> bool:
        return self.solution is not None


@dataclass(frozen=True)
class PlannerConfig:
    max_expansions: Optional[int] = None

    def expansion_limit(self, n: int) -> int:
        if self.max_expansions is not None:
            return self.max_expansions
        return min(10 * 3**n, 100_000)


def _model_table(models: Iterable[ActionModel]) -> dict[str, ActionModel]:
    table: dict[str, ActionModel] = {}
    for h in models:
        prev = table.get(h.name)
        if prev is not None and prev.key != h.key:
            raise DomainError(f"two different models share the name {h.name!r}")
        table[h.name] = h
    return table


def _build_tree(g: StateSet, branches: list[tuple[int, ActionModel]]) -> BTNode:
    u = g.universe
    kids: list[BTNode] = [Condition(g)]
    for bits, h in branches:
        kids.append(Sequence((Condition(StateSet(u, bits)), Action(h.name))))
    return Fallback(tuple(kids))


def bt_expansion(
    p: Task, models: Iterable[ActionModel], cfg: PlannerConfig = PlannerConfig()
) -> PlanResult:
    """Plan a BT for ``p`` from ``models``; see the module docstring for the scheme.

    Raises :class:`ResourceError` (with the partial :class:`PlanningContext`
    attached) once ``cfg.max_expansions`` conditions have been expanded.
    """
    table = _model_table(models)
    ordered = sorted(table.values(), key=lambda h: (h.name, h.key))
    s0, g = p.s0.bits, p.g.bits
    if g & ~s0 == 0:
        return PlanResult(p.id, solution=Condition(p.g), expanded_condition_count=0)

    limit = cfg.expansion_limit(p.g.universe.n)
    steps = [(h.pre.bits, h.add.bits, h.delete.bits, h) for h in ordered]
    expanded = [g]
    branches: list[tuple[int, ActionModel]] = []
    queue = deque([g])
    dead_ends: list[int] = []
    count = 0

    def context(solved: bool, frontier: list[int]) -> PlanningContext:
        sketch = _build_tree(p.g, branches)
        return PlanningContext(
            task_id=p.id,
            solved=solved,
            expanded_condition_count=count,
            frontier=tuple(StateSet(p.g.universe, c) for c in frontier),
            sketch=sketch,
            actions_used=tuple(action_names(sketch)),
        )

    while queue:
        if count >= limit:
            raise ResourceError(
                f"task {p.id}: exceeded {limit} condition expansions",
                context=context(False, list(queue)),
            )
        c = queue.popleft()
        count += 1
        grew = False
        for pre, add, dele, h in steps:
            if dele & c or not add & c:
                continue
            c2 = (c & ~add) | pre
            if any(e & ~c2 == 0 for e in expanded):
                continue
            expanded.append(c2)
            branches.append((c2, h))
            queue.append(c2)
            grew = True
            if c2 & ~s0 == 0:
                return PlanResult(
                    p.id, solution=_build_tree(p.g, branches), expanded_condition_count=count
                )
        if not grew:
            dead_ends.append(c)
    return PlanResult(p.id, context=context(False, dead_ends), expanded_condition_count=count)


def plan_all(
    tasks: Iterable[Task], models: Iterable[ActionModel], cfg: PlannerConfig = PlannerConfig()
) -> dict[str, PlanResult]:
    """Plan every task independently; resource errors stay local to their task."""
    models = list(models)
    out: dict[str, PlanResult] = {}
    for p in tasks:
        try:
            out[p.id] = bt_expansion(p, models, cfg)
        except ResourceError as err:
            log.warning("planning %s: %s", p.id, err)
            ctx = err.context
            out[p.id] = PlanResult(
                p.id, context=ctx, error=str(err), expanded_condition_count=ctx.expanded_condition_count
            )
    return out


def failed_contexts(results: Mapping[str, PlanResult]) -> list[PlanningContext]:
    """``I_fail``: the planning contexts of every task that did not get a solution."""
    return [r.context for r in results.values() if r.context is not None]


def forward_search_oracle(p: Task, models: Iterable[ActionModel]) -> Optional[int]:
    """Shortest plan length by breadth-first search over reachable states."""
    n = p.g.universe.n
    if n > ORACLE_MAX_N:
        raise ResourceError(f"forward oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    steps = [(h.pre.bits, h.add.bits, h.delete.bits) for h in models]
    g = p.g.bits
    start = p.s0.bits
    if g & ~start == 0:
        return 0
    dist = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        d = dist[s]
        for pre, add, dele in steps:
            if pre & ~s:
                continue
            t = (s | add) & ~dele
            if t in dist:
                continue
            if g & ~t == 0:
                return d + 1
            dist[t] = d + 1
            queue.append(t)
    return None


def default_tick_budget(tree: BTNode) -> int:
    leaves = sum(1 for node in iter_nodes(tree) if isinstance(node, Action))
    return 2 * leaves + 1


def simulate(
    tree: BTNode, p: Task, models: Iterable[ActionModel], tick_budget: Optional[int] = None
) -> tuple[Status, list[StateSet]]:
    """Closed-loop execution against the models themselves.

    Returns the final status (``RUNNING`` means the budget ran out or an
    action fired outside its precondition) and the visited states.
    """
    table = _model_table(models)
    check_actions(tree, table)
    budget = default_tick_budget(tree) if tick_budget is None else tick_budget
    u = p.s0.universe
    s = p.s0.bits
    trace = [p.s0]
    for _ in range(budget):
        st, name = _tick(tree, s)
        if st is not Status.RUNNING:
            return st, trace
        h = table[name]  # type: ignore[index]
        if h.pre.bits & ~s:
            return Status.RUNNING, trace
        s = (s | h.add.bits) & ~h.delete.bits
        trace.append(StateSet(u, s))
    return Status.RUNNING, trace


def verify_solution(
    tree: BTNode, p: Task, models: Iterable[ActionModel], tick_budget: Optional[int] = None
) -> bool:
    status, trace = simulate(tree, p, models, tick_budget)
    return status is Status.SUCCESS and p.g <= trace[-1]
