"""Simulated symbolic environment owning the executable policy library.

Each :class:`ControlPolicy` hides a true STRIPS transition. Grounding code
only ever sees policy ids, descriptions, and :class:`ExecutionContext`
records produced by :meth:`SimEnvironment.execute`. Inside
:func:`redact_hidden` any read of a hidden field from outside the environment
raises :class:`HiddenFieldAccess`, which is how the CLI's ``--redact`` mode
audits that boundary.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, HiddenFieldAccess, UnsatisfiableScenarioError
from .symbolic import (
    ActionModel,
    BTNode,
    DomainUniverse,
    StateSet,
    Status,
    ValidityRules,
    _tick,
    action_names,
)
from .system import GroundedAction

log = logging.getLogger(__name__)

_audit_enabled = contextvars.ContextVar("btground_audit_enabled", default=False)
_inside_env = contextvars.ContextVar("btground_inside_env", default=False)


@contextlib.contextmanager
def redact_hidden() -> Iterator[None]:
    """Make hidden-field reads outside the environment raise."""
    token = _audit_enabled.set(True)
    try:
        yield
    finally:
        _audit_enabled.reset(token)


@contextlib.contextmanager
def _env_access() -> Iterator[None]:
    token = _inside_env.set(True)
    try:
        yield
    finally:
        _inside_env.reset(token)


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from a master seed and any reprable tokens."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


class ControlPolicy:
    """An executable unit with a hidden ``<pre, add, del>`` and stochastic failure."""

    __slots__ = (
        "id",
        "description",
        "duration_ticks",
        "failure_prob",
        "_pre",
        "_add",
        "_del",
        "_fail_add",
        "_fail_del",
    )

    def __init__(
        self,
        id: str,
        pre: StateSet,
        add: StateSet,
        delete: StateSet,
        description: str = "",
        duration_ticks: int = 1,
        failure_prob: float = 0.0,
        failure_add: Optional[StateSet] = None,
        failure_del: Optional[StateSet] = None,
    ):
        if add.bits & delete.bits:
            raise DomainError(f"policy {id}: hidden add and del overlap")
        if duration_ticks < 1:
            raise DomainError(f"policy {id}: duration must be positive")
        if not 0.0 <= failure_prob <= 1.0:
            raise DomainError(f"policy {id}: failure_prob must lie in [0, 1]")
        u = pre.universe
        self.id = id
        self.description = description
        self.duration_ticks = duration_ticks
        self.failure_prob = failure_prob
        self._pre, self._add, self._del = pre, add, delete
        self._fail_add = failure_add if failure_add is not None else StateSet(u, 0)
        self._fail_del = failure_del if failure_del is not None else StateSet(u, 0)

    def _guard(self) -> None:
        if _audit_enabled.get() and not _inside_env.get():
            raise HiddenFieldAccess(f"hidden transition of policy {self.id!r} read outside the environment")

    @property
    def hidden_pre(self) -> StateSet:
        self._guard()
        return self._pre

    @property
    def hidden_add(self) -> StateSet:
        self._guard()
        return self._add

    @property
    def hidden_del(self) -> StateSet:
        self._guard()
        return self._del

    @property
    def failure_add(self) -> StateSet:
        self._guard()
        return self._fail_add

    @property
    def failure_del(self) -> StateSet:
        self._guard()
        return self._fail_del

    @property
    def universe(self) -> DomainUniverse:
        return self._pre.universe

    def _fields(self) -> tuple:
        return (
            self.id,
            self.description,
            self.duration_ticks,
            self.failure_prob,
            self._pre,
            self._add,
            self._del,
            self._fail_add,
            self._fail_del,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ControlPolicy):
            return NotImplemented
        return self._fields() == other._fields()

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        return f"ControlPolicy({self.id!r})"


@dataclass(frozen=True)
class Scenario:
    s0: StateSet
    seed: Optional[int]


@dataclass(frozen=True)
class ExecutionContext:
    """One execution record (``I_e``). ``succeeded`` is the consistency verdict."""

    attempt: int
    policy_id: str
    s0: StateSet
    s_t: StateSet
    expected: StateSet
    succeeded: bool
    ticks_elapsed: int
    note: str = ""
    seed: Optional[int] = None
    strict: bool = False
    params: Mapping[str, Any] = field(default_factory=dict)

    @property
    def changed(self) -> bool:
        return self.s0.bits != self.s_t.bits


def check_consistency_outcome(
    h: ActionModel, s_t: StateSet, strict: bool = False, s0: Optional[StateSet] = None
) -> bool:
    """Did execution leave behind what ``h`` promised?

    The default is the plain superset test ``s_t >= pre | add - del``. It never
    looks at deleted atoms. ``strict`` instead demands the exact transition
    ``s_t == s0 | add - del``, which also catches missed or extra deletions
    and extra additions; it needs ``s0``.
    """
    if not strict:
        return h.expected() <= s_t
    if s0 is None:
        raise ValueError("strict consistency check needs the starting state")
    return s_t.bits == (s0.bits | h.add.bits) & ~h.delete.bits


@dataclass(frozen=True)
class TraceStep:
    tick: int
    state: StateSet
    status: Status
    action: Optional[str] = None
    policy: Optional[str] = None
    ticks_elapsed: int = 0


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    status: Status
    final_state: StateSet
    complete: bool
    executions: int

    @property
    def succeeded(self) -> bool:
        return self.status is Status.SUCCESS


class SimEnvironment:
    """Owns ``Pi_P``; samples scenarios and executes policies and whole trees."""

    def __init__(
        self,
        universe: DomainUniverse,
        policies: Sequence[ControlPolicy] = (),
        rules: ValidityRules = ValidityRules(),
        fill_prob: float = 0.5,
    ):
        ids = [p.id for p in policies]
        if len(set(ids)) != len(ids):
            raise DomainError("duplicate policy ids")
        self.universe = universe
        self.policies = {p.id: p for p in policies}
        self.rules = rules
        self.fill_prob = fill_prob

    def catalog(self) -> list[tuple[str, str]]:
        """Public view of the library: ``(id, description)`` pairs, declaration order."""
        return [(p.id, p.description) for p in self.policies.values()]

    def policy(self, policy_id: str) -> ControlPolicy:
        try:
            return self.policies[policy_id]
        except KeyError:
            raise DomainError(f"unknown policy {policy_id!r}") from None

    # -- scenarios ---------------------------------------------------------

    def _repair(self, bits: int, protected: int) -> int:
        for g in self.rules.mutex_masks():
            members = bits & g
            if not members & (members - 1):
                continue
            keep = protected & g
            if not keep:
                keep = members & -members  # lowest index wins
            bits = (bits & ~g) | keep
        return bits

    def sample_scenario(
        self, h: ActionModel, seed: Optional[int] = None, fill_prob: Optional[float] = None
    ) -> Scenario:
        """Random ``s0`` with ``pre(h) <= s0``; other atoms drawn i.i.d. then mutex-repaired."""
        pre = h.pre.bits
        for g in self.rules.mutex_masks():
            both = pre & g
            if both & (both - 1):
                raise UnsatisfiableScenarioError(
                    f"precondition of {h.name} violates a mutex group: {self.universe.atom_names(both)}"
                )
        fp = self.fill_prob if fill_prob is None else fill_prob
        n = self.universe.n
        draws = np.random.default_rng(seed).random(n)
        bits = pre
        for i in range(n):
            if draws[i] < fp:
                bits |= 1 << i
        bits = self._repair(bits, pre)
        return Scenario(StateSet(self.universe, bits), seed)

    # -- execution ---------------------------------------------------------

    def execute(
        self,
        policy_id: str,
        s0: StateSet,
        rng: Optional[np.random.Generator] = None,
        model: Optional[ActionModel] = None,
        attempt: int = 0,
        strict: bool = False,
        params: Optional[Mapping[str, Any]] = None,
        seed: Optional[int] = None,
    ) -> tuple[StateSet, ExecutionContext]:
        policy = self.policy(policy_id)
        if rng is None:
            rng = np.random.default_rng(seed)
        u = self.universe
        with _env_access():
            pre, add, dele = policy.hidden_pre.bits, policy.hidden_add.bits, policy.hidden_del.bits
            fadd, fdel = policy.failure_add.bits, policy.failure_del.bits
        s = s0.bits
        if pre & ~s:
            s_t, ticks = s, 0
            missing = len(u.atom_names(pre & ~s))
            note = f"precondition unmet at tick 0 ({missing} atom(s) missing)"
        elif policy.failure_prob > 0 and rng.random() < policy.failure_prob:
            s_t, ticks = (s | fadd) & ~fdel, policy.duration_ticks
            note = "stochastic failure"
        else:
            s_t, ticks = (s | add) & ~dele, policy.duration_ticks
            note = ""
        st = StateSet(u, s_t)
        if model is None:
            expected = StateSet(u, 0)
            ok = True
        else:
            expected = model.expected()
            ok = check_consistency_outcome(model, st, strict, s0)
        ctx = ExecutionContext(
            attempt=attempt,
            policy_id=policy_id,
            s0=s0,
            s_t=st,
            expected=expected,
            succeeded=ok,
            ticks_elapsed=ticks,
            note=note,
            seed=seed,
            strict=strict,
            params=dict(params or {}),
        )
        return st, ctx

    def validate_consistency(
        self,
        h: ActionModel,
        policy_id: str,
        k: int = 4,
        seed: int = 0,
        strict: bool = False,
        attempt: int = 0,
        params: Optional[Mapping[str, Any]] = None,
    ) -> tuple[bool, list[ExecutionContext]]:
        """Run ``k`` independent sample -> execute -> check cycles.

        Every cycle's scenario and execution randomness is derived from
        ``seed``, so the same call always replays identically. In strict mode
        the first two scenarios are the boundary cases ``s0 = pre(h)`` and
        ``s0`` = everything the mutex groups allow.
        """
        if k < 1:
            raise ValueError("k must be at least 1")
        self.policy(policy_id)
        contexts = []
        for i in range(k):
            sc_seed = derive_seed(seed, i, "scenario")
            if strict and i == 0:
                s0 = h.pre
                self.sample_scenario(h, sc_seed, fill_prob=0.0)  # mutex check only
            elif strict and i == 1:
                s0 = self.sample_scenario(h, sc_seed, fill_prob=1.0).s0
            else:
                s0 = self.sample_scenario(h, sc_seed).s0
            ex_seed = derive_seed(seed, i, "execute")
            _, ctx = self.execute(
                policy_id, s0, model=h, attempt=attempt, strict=strict, params=params, seed=ex_seed
            )
            contexts.append(ctx)
        return all(c.succeeded for c in contexts), contexts

    def execute_bt(
        self,
        tree: BTNode,
        s0: StateSet,
        bindings: Mapping[str, GroundedAction],
        tick_budget: int = 100,
        seed: Optional[int] = None,
    ) -> Trace:
        """Closed-loop run: tick, execute the active action's policy, re-tick."""
        for name in action_names(tree):
            if name not in bindings:
                raise DomainError(f"action {name!r} is not bound to a policy")
            self.policy(bindings[name].policy)
        rng = np.random.default_rng(seed)
        s = s0
        steps = []
        executions = 0
        for t in range(tick_budget):
            status, active = _tick(tree, s.bits)
            if status is not Status.RUNNING:
                steps.append(TraceStep(t, s, status))
                return Trace(tuple(steps), status, s, True, executions)
            ga = bindings[active]  # type: ignore[index]
            s_t, ctx = self.execute(ga.policy, s, rng, model=ga.model, attempt=executions)
            executions += 1
            steps.append(TraceStep(t, s, status, active, ga.policy, ctx.ticks_elapsed))
            s = s_t
        log.info("execute_bt: tick budget %d exhausted", tick_budget)
        return Trace(tuple(steps), Status.RUNNING, s, False, executions)
