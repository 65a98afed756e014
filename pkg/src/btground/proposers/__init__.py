"""Model proposers, policy samplers and model refiners."""

from .base import (
    PHASES,
    ModelProposer,
    ModelRefiner,
    PolicyChoice,
    PolicySampler,
    ProposalInput,
    ProposerRequest,
    ProposerResponse,
    ProposerSuite,
    RefineInput,
    Refinement,
    SampleInput,
    decode_model,
    encode_model,
)
from .builtin import (
    BUILTIN,
    DraftProposer,
    ExhaustiveProposer,
    ExhaustiveSampler,
    HeuristicProposer,
    HeuristicRefiner,
    HeuristicSampler,
    NullRefiner,
    OracleProposer,
    OracleSampler,
    RandomProposer,
    RandomRefiner,
    RandomSampler,
    guess_model,
    make_suite,
    policy_score,
)
from .prompts import load_schema, render_prompt

__all__ = [
    "BUILTIN",
    "PHASES",
    "DraftProposer",
    "ExhaustiveProposer",
    "ExhaustiveSampler",
    "HeuristicProposer",
    "HeuristicRefiner",
    "HeuristicSampler",
    "ModelProposer",
    "ModelRefiner",
    "NullRefiner",
    "OracleProposer",
    "OracleSampler",
    "PolicyChoice",
    "PolicySampler",
    "ProposalInput",
    "ProposerRequest",
    "ProposerResponse",
    "ProposerSuite",
    "RandomProposer",
    "RandomRefiner",
    "RandomSampler",
    "RefineInput",
    "Refinement",
    "SampleInput",
    "decode_model",
    "encode_model",
    "guess_model",
    "load_schema",
    "make_suite",
    "policy_score",
    "render_prompt",
]
