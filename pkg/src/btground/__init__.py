"""Ground behavior-tree action models against black-box control policies.

The subpackages follow the pipeline: symbolic states and models
(:mod:`btground.symbolic`, :mod:`btground.modelspace`), BT planning
(:mod:`btground.planner`), the simulated policy library (:mod:`btground.env`),
the grounding algorithms and metrics (:mod:`btground.grounding`), model
proposers (:mod:`btground.proposers`) and file formats plus the CLI
(:mod:`btground.io`, :mod:`btground.cli`).
"""

from .errors import (
    BTGroundError,
    DomainError,
    HiddenFieldAccess,
    ParseError,
    PreconditionError,
    ProtocolError,
    ResourceError,
    UnsatisfiableScenarioError,
)
from .symbolic import (
    ActionModel,
    DomainUniverse,
    StateSet,
    ValidityRules,
)

__version__ = "0.1.0"

__all__ = [
    "ActionModel",
    "BTGroundError",
    "DomainError",
    "DomainUniverse",
    "HiddenFieldAccess",
    "ParseError",
    "PreconditionError",
    "ProtocolError",
    "ResourceError",
    "StateSet",
    "UnsatisfiableScenarioError",
    "ValidityRules",
]
