"""The grounded BT system ``<C, A>``: action models bound to policy ids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .symbolic import ActionModel, DomainUniverse, StateSet


@dataclass(frozen=True)
class GroundedAction:
    model: ActionModel
    policy: str
    # seed of the validation run that accepted the pair, for replay
    seed: Optional[int] = None

    @property
    def name(self) -> str:
        return self.model.name


@dataclass(frozen=True)
class BTSystem:
    conditions: StateSet
    actions: tuple[GroundedAction, ...]

    @classmethod
    def from_actions(cls, universe: DomainUniverse, actions: Iterable[GroundedAction]) -> "BTSystem":
        actions = tuple(actions)
        bits = 0
        for a in actions:
            bits |= a.model.pre.bits | a.model.add.bits | a.model.delete.bits
        return cls(StateSet(universe, bits), actions)

    @property
    def models(self) -> list[ActionModel]:
        return [a.model for a in self.actions]

    def action_table(self) -> dict[str, ActionModel]:
        return {a.model.name: a.model for a in self.actions}

    def bindings(self) -> dict[str, GroundedAction]:
        return {a.model.name: a for a in self.actions}
