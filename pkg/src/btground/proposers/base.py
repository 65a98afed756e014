"""Proposer interfaces, their typed inputs, and the wire records behind them.

Built-in proposers consume the typed inputs directly. Every input also knows
how to flatten itself into a :class:`ProposerRequest`, the record an external
adapter receives. Withheld contexts (ablations) are ``None`` on the typed
input and absent from the wire record, not merely empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Protocol, Sequence, runtime_checkable

from ..env import ExecutionContext
from ..errors import ParseError, ProtocolError
from ..io.bttext import render_bt
from ..modelspace import Key, ModelSpace
from ..planner import PlanningContext, Task
from ..symbolic import ActionModel, DomainUniverse, StateSet, format_atom, parse_atom

PHASES = ("initial_proposal", "repair_proposal", "policy_sample", "refine")
PROTOCOL_VERSION = 1


# -- wire encoding -----------------------------------------------------------


def encode_state(s: StateSet) -> list[str]:
    return s.atoms()


def decode_state(universe: DomainUniverse, atoms: Any, what: str = "state") -> StateSet:
    if not isinstance(atoms, list) or not all(isinstance(a, str) for a in atoms):
        raise ProtocolError(f"{what}: expected a list of atom strings")
    bits = 0
    for text in atoms:
        try:
            atom = format_atom(*parse_atom(text))
        except ParseError as err:
            raise ProtocolError(f"{what}: {err.message}") from None
        if atom not in universe:
            raise ProtocolError(f"{what}: unknown atom {atom}")
        bits |= 1 << universe.index(atom)
    return universe.from_bits(bits)


def encode_model(h: ActionModel) -> dict:
    return {"name": h.name, "pre": h.pre.atoms(), "add": h.add.atoms(), "del": h.delete.atoms()}


def decode_model(universe: DomainUniverse, rec: Any) -> ActionModel:
    if not isinstance(rec, Mapping):
        raise ProtocolError("model record must be an object")
    name = rec.get("name")
    if not isinstance(name, str) or not name:
        raise ProtocolError("model record needs a non-empty name")
    return ActionModel(
        name,
        decode_state(universe, rec.get("pre", []), f"{name}.pre"),
        decode_state(universe, rec.get("add", []), f"{name}.add"),
        decode_state(universe, rec.get("del", []), f"{name}.del"),
    )


def encode_task(t: Task) -> dict:
    return {"id": t.id, "s0": t.s0.atoms(), "g": t.g.atoms()}


def encode_planning_context(ctx: PlanningContext) -> dict:
    return {
        "task": ctx.task_id,
        "solved": ctx.solved,
        "expanded_condition_count": ctx.expanded_condition_count,
        "frontier": [c.atoms() for c in ctx.frontier],
        "sketch": render_bt(ctx.sketch),
        "actions_used": list(ctx.actions_used),
    }


def encode_execution(ctx: ExecutionContext) -> dict:
    return {
        "attempt": ctx.attempt,
        "policy": ctx.policy_id,
        "s0": ctx.s0.atoms(),
        "s_t": ctx.s_t.atoms(),
        "added": (ctx.s_t - ctx.s0).atoms(),
        "deleted": (ctx.s0 - ctx.s_t).atoms(),
        "expected": ctx.expected.atoms(),
        "succeeded": ctx.succeeded,
        "ticks_elapsed": ctx.ticks_elapsed,
        "note": ctx.note,
    }


def encode_universe(space: ModelSpace) -> dict:
    u = space.universe
    return {
        "atoms": [str(p) for p in u.propositions],
        "objects": dict(u.objects),
        "mutex_groups": [g.atoms() for g in space.rules.mutex_groups],
        "rules": {
            "add_pre_disjoint": space.rules.add_pre_disjoint,
            "del_subset_pre": space.rules.del_subset_pre,
        },
    }


def _explored_digest(space: ModelSpace, explored: frozenset) -> dict:
    return {"model_space_size": space.size(), "explored_count": len(explored)}


# -- records -----------------------------------------------------------------


@dataclass(frozen=True)
class ProposerRequest:
    phase: str
    payload: Mapping[str, Any]
    context_flags: Mapping[str, bool]

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")

    def to_record(self) -> dict:
        return {
            "version": PROTOCOL_VERSION,
            "phase": self.phase,
            "payload": self.payload,
            "context_flags": dict(self.context_flags),
        }

    def to_json(self) -> str:
        """Canonical single-line form; identical requests give identical bytes."""
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass(frozen=True)
class ProposerResponse:
    phase: str
    models: tuple[ActionModel, ...] = ()
    policy_id: Optional[str] = None
    params: Mapping[str, Any] = field(default_factory=dict)
    model: Optional[ActionModel] = None

    def to_record(self) -> dict:
        rec: dict[str, Any] = {"phase": self.phase}
        if self.phase in ("initial_proposal", "repair_proposal"):
            rec["models"] = [encode_model(h) for h in self.models]
        elif self.phase == "policy_sample":
            rec["policy_id"] = self.policy_id
            rec["params"] = dict(self.params)
        else:
            rec["model"] = None if self.model is None else encode_model(self.model)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_record(cls, universe: DomainUniverse, rec: Mapping[str, Any]) -> "ProposerResponse":
        phase = rec.get("phase")
        if phase in ("initial_proposal", "repair_proposal"):
            return cls(phase, models=tuple(decode_model(universe, m) for m in rec.get("models", [])))
        if phase == "policy_sample":
            return cls(phase, policy_id=rec.get("policy_id"), params=dict(rec.get("params") or {}))
        if phase == "refine":
            m = rec.get("model")
            return cls(phase, model=None if m is None else decode_model(universe, m))
        raise ProtocolError(f"unknown phase {phase!r} in response")


# -- typed inputs ------------------------------------------------------------


@dataclass(frozen=True)
class ProposalInput:
    """Input to initial and repair proposals (``failures`` is ``I_fail``)."""

    phase: str
    tasks: tuple[Task, ...]
    space: ModelSpace
    explored: frozenset  # keys no longer in H_U
    known: tuple[ActionModel, ...] = ()
    failures: Optional[tuple[PlanningContext, ...]] = None
    catalog: tuple[tuple[str, str], ...] = ()
    batch: int = 8
    seed: int = 0
    round: int = 0

    @property
    def universe(self) -> DomainUniverse:
        return self.space.universe

    def unexplored(self, key: Key) -> bool:
        return key not in self.explored

    def to_request(self) -> ProposerRequest:
        payload: dict[str, Any] = {
            "tasks": [encode_task(t) for t in self.tasks],
            "universe": encode_universe(self.space),
            "model_space": _explored_digest(self.space, self.explored),
            "known_models": [encode_model(h) for h in self.known],
            "catalog": [{"id": i, "description": d} for i, d in self.catalog],
            "batch": self.batch,
        }
        if self.failures is not None:
            payload["failures"] = [encode_planning_context(c) for c in self.failures]
        return ProposerRequest(
            self.phase, payload, {"planning_contexts": self.failures is not None, "execution_contexts": False}
        )


@dataclass(frozen=True)
class SampleInput:
    """Input to policy sampling for one candidate model."""

    model: ActionModel
    catalog: tuple[tuple[str, str], ...]
    tried: tuple[str, ...] = ()
    history: Optional[tuple[ExecutionContext, ...]] = None
    attempt: int = 0
    seed: int = 0

    def to_request(self) -> ProposerRequest:
        payload: dict[str, Any] = {
            "model": encode_model(self.model),
            "catalog": [{"id": i, "description": d} for i, d in self.catalog],
            "tried": list(self.tried),
            "attempt": self.attempt,
        }
        if self.history is not None:
            payload["executions"] = [encode_execution(c) for c in self.history]
        return ProposerRequest(
            "policy_sample", payload, {"planning_contexts": False, "execution_contexts": self.history is not None}
        )


@dataclass(frozen=True)
class RefineInput:
    """Input to refinement of a model that never validated."""

    model: ActionModel
    space: ModelSpace
    explored: frozenset
    catalog: tuple[tuple[str, str], ...]
    tasks: tuple[Task, ...] = ()
    failures: Optional[tuple[PlanningContext, ...]] = None
    history: Optional[tuple[ExecutionContext, ...]] = None
    tried: tuple[str, ...] = ()
    seed: int = 0

    @property
    def universe(self) -> DomainUniverse:
        return self.space.universe

    def to_request(self) -> ProposerRequest:
        payload: dict[str, Any] = {
            "model": encode_model(self.model),
            "universe": encode_universe(self.space),
            "model_space": _explored_digest(self.space, self.explored),
            "catalog": [{"id": i, "description": d} for i, d in self.catalog],
            "tasks": [encode_task(t) for t in self.tasks],
            "tried": list(self.tried),
        }
        if self.failures is not None:
            payload["failures"] = [encode_planning_context(c) for c in self.failures]
        if self.history is not None:
            payload["executions"] = [encode_execution(c) for c in self.history]
        return ProposerRequest(
            "refine",
            payload,
            {"planning_contexts": self.failures is not None, "execution_contexts": self.history is not None},
        )


@dataclass(frozen=True)
class PolicyChoice:
    policy_id: str
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Refinement:
    """A refiner's answer. ``model`` is ``None`` for "no refinement"; ``notes``
    carry diagnostics the refiner could not act on (e.g. stale deletes)."""

    model: Optional[ActionModel]
    notes: tuple[str, ...] = ()


# -- protocols ---------------------------------------------------------------


@runtime_checkable
class ModelProposer(Protocol):
    def propose(self, inp: ProposalInput) -> Sequence[ActionModel]: ...


@runtime_checkable
class PolicySampler(Protocol):
    def sample(self, inp: SampleInput) -> PolicyChoice: ...


@runtime_checkable
class ModelRefiner(Protocol):
    def refine(self, inp: RefineInput) -> Refinement: ...


@dataclass
class ProposerSuite:
    proposer: ModelProposer
    sampler: PolicySampler
    refiner: ModelRefiner
    name: str = "custom"
