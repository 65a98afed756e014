import json
import sys

import jsonschema
import pytest

from btground.domains import load_bundled
from btground.errors import ProtocolError
from btground.grounding import GroundingProblem, cabto_ground
from btground.modelspace import ModelSpace
from btground.planner import PlanningContext, Task
from btground.proposers import (
    PHASES,
    HeuristicProposer,
    HeuristicRefiner,
    HeuristicSampler,
    OracleProposer,
    ProposalInput,
    ProposerRequest,
    ProposerResponse,
    RandomProposer,
    RefineInput,
    SampleInput,
    decode_model,
    encode_model,
    load_schema,
    make_suite,
    policy_score,
    render_prompt,
)
from btground.proposers.external import ExternalProposer, SubprocessTransport
from btground.proposers.text import split_cues, tokens
from btground.symbolic import Condition, DomainUniverse, make_model
from conftest import ADAPTER


@pytest.fixture
def pqr():
    return DomainUniverse(["p", "q", "r"])


def test_heuristic_ranks_goal_adding_model_first(pqr):
    task = Task("t", pqr.state(["p"]), pqr.state(["q"]))
    out = HeuristicProposer().propose(ProposalInput("initial_proposal", (task,), ModelSpace(pqr), frozenset()))
    assert out[0].key == make_model(pqr, "x", ["p"], ["q"]).key
    assert all(h.add & task.g for h in out)


def test_heuristic_targets_planning_frontier(pqr):
    task = Task("t", pqr.state(["p"]), pqr.state(["q", "r"]))
    ctx = PlanningContext("t", False, 1, (pqr.state(["q", "r"]),), Condition(pqr.state(["q", "r"])), ())
    inp = ProposalInput("repair_proposal", (task,), ModelSpace(pqr), frozenset(), failures=(ctx,), batch=8)
    keys = [h.key for h in HeuristicProposer().propose(inp)[:8]]
    assert make_model(pqr, "x", ["p"], ["q", "r"]).key in keys


def test_exhausted_space_yields_nothing(pqr):
    space = ModelSpace(pqr)
    task = Task("t", pqr.state(["p"]), pqr.state(["q"]))
    inp = ProposalInput("repair_proposal", (task,), space, frozenset(space.iter_keys()))
    assert HeuristicProposer().propose(inp) == []
    assert RandomProposer().propose(inp) == []


def test_sampler_follows_name_and_style_words():
    u = DomainUniverse(["Holding(apple)", "IsOpen(drawer)", "In(apple,drawer)"])
    h = make_model(u, "PutIn", ["Holding(apple)"], ["In(apple,drawer)"], ["Holding(apple)"])
    catalog = (
        ("pick_apple", "pick-style: grasp the apple"),
        ("stow", "putin-style: place the apple into the drawer"),
        ("open_drawer", "pull-style: open the drawer"),
    )
    assert HeuristicSampler().sample(SampleInput(h, catalog)).policy_id == "stow"
    assert HeuristicSampler().sample(SampleInput(h, catalog, tried=("stow",))).policy_id != "stow"


def test_state_words_do_not_count_as_effects():
    effect, state = split_cues("fill-style: fill the held cup under the running tap")
    assert "hold" in state and "hold" not in effect
    assert "fill" in effect
    u = DomainUniverse(["Holding(cup)", "Full(cup)"])
    pick = make_model(u, "g_x", [], ["Holding(cup)"])
    assert policy_score(pick, "pick-style: grasp the cup", "pick_cup") > policy_score(
        pick, "fill-style: fill the held cup", "fill_cup"
    )


def test_tokens_split_camel_case_and_args():
    assert tokens("PutIn(apple,drawer)") == {"put", "putin", "apple", "drawer"}


def _history(dom, h, pid, seeds=range(6), k=4):
    env = dom.environment()
    ctxs = []
    for s in seeds:
        ctxs.extend(env.validate_consistency(h, pid, k, seed=s)[1])
    return tuple(ctxs)


def _refine_input(dom, h, history):
    return RefineInput(h, dom.model_space(), frozenset({h.key}), tuple(dom.environment().catalog()), history=history)


def test_refiner_adds_missing_precondition(drawer):
    dom, _ = drawer
    u = dom.universe
    h = make_model(u, "PutIn", ["Holding(apple)"], ["In(apple,drawer)"], ["Holding(apple)"])
    ref = HeuristicRefiner().refine(_refine_input(dom, h, _history(dom, h, "put_in")))
    assert ref.model is not None
    assert ref.model.pre == u.state(["Holding(apple)", "IsOpen(drawer)"])
    assert ref.model.name == "PutIn'"


def test_refiner_drops_unverified_add():
    dom, _ = load_bundled("pick_unverified_add")
    draft = next(m for m in dom.models if m.name == "Pick")
    ref = HeuristicRefiner().refine(_refine_input(dom, draft, _history(dom, draft, "pick_cup")))
    extra = dom.universe.state(["InReach(cup)"])
    assert ref.model is not None and not ref.model.add & extra
    assert ref.model.add <= draft.add and ref.model.add != draft.add


def test_refiner_only_flags_stale_delete():
    dom, _ = load_bundled("put_stale_delete")
    env = dom.environment()
    draft = dom.models[0]
    hist = []
    for s in range(6):
        hist.extend(env.validate_consistency(draft, "put_cup", 4, seed=s, strict=True)[1])
    ref = HeuristicRefiner().refine(_refine_input(dom, draft, tuple(hist)))
    assert ref.model is None
    assert any("stale delete" in n and "At(cup,shelf)" in n for n in ref.notes)


def test_refiner_without_history_uses_description(drawer):
    dom, _ = drawer
    u = dom.universe
    h = make_model(u, "PutIn", ["Holding(apple)"], ["In(apple,drawer)"], ["Holding(apple)"])
    ref = HeuristicRefiner().refine(_refine_input(dom, h, None))
    assert ref.model is not None and ref.model.pre >= h.pre and ref.model.pre != h.pre


def test_oracle_proposes_hidden_transitions(drawer):
    dom, ts = drawer
    env = dom.environment()
    space = dom.model_space()
    got = {h.key for h in OracleProposer(env).propose(ProposalInput("initial_proposal", ts.tasks, space, frozenset()))}
    want = {(p.hidden_pre.bits, p.hidden_add.bits, p.hidden_del.bits) for p in dom.policies}
    assert got == want


# -- protocol ------------------------------------------------------------------


def test_requests_validate_against_schema_and_are_canonical(drawer):
    dom, ts = drawer
    validator = jsonschema.Draft202012Validator(load_schema("request"))
    space = dom.model_space()
    h = dom.models[0] if dom.models else make_model(dom.universe, "Open", [], ["IsOpen(drawer)"])
    env = dom.environment()
    _, hist = env.validate_consistency(h, "open_drawer", 2, seed=1)
    ctx = PlanningContext("stow", False, 1, (dom.universe.state(["IsOpen(drawer)"]),), Condition(ts.tasks[1].g), ())
    requests = [
        ProposalInput("initial_proposal", ts.tasks, space, frozenset(), catalog=tuple(env.catalog())).to_request(),
        ProposalInput("repair_proposal", ts.tasks, space, frozenset({h.key}), failures=(ctx,)).to_request(),
        SampleInput(h, tuple(env.catalog()), history=tuple(hist)).to_request(),
        RefineInput(h, space, frozenset(), tuple(env.catalog()), ts.tasks, (ctx,), tuple(hist)).to_request(),
    ]
    for req in requests:
        line = req.to_json()
        assert "\n" not in line
        rec = json.loads(line)
        validator.validate(rec)
        assert json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False) == line
        assert render_prompt(req)
    assert requests[0].context_flags == {"planning_contexts": False, "execution_contexts": False}
    assert requests[3].context_flags == {"planning_contexts": True, "execution_contexts": True}


def test_withheld_context_renders_as_not_provided(drawer):
    dom, ts = drawer
    req = ProposalInput("repair_proposal", ts.tasks, dom.model_space(), frozenset()).to_request()
    assert "(not provided)" in render_prompt(req)


def test_unknown_phase_rejected():
    with pytest.raises(ValueError):
        ProposerRequest("brainstorm", {}, {})
    assert PHASES == ("initial_proposal", "repair_proposal", "policy_sample", "refine")


def test_response_round_trip(drawer):
    dom, _ = drawer
    u = dom.universe
    h = make_model(u, "Open", [], ["IsOpen(drawer)"])
    for resp in (
        ProposerResponse("initial_proposal", models=(h,)),
        ProposerResponse("policy_sample", policy_id="open_drawer", params={"speed": 1}),
        ProposerResponse("refine", model=None),
        ProposerResponse("refine", model=h),
    ):
        rec = json.loads(resp.to_json())
        jsonschema.validate(rec, load_schema("response"))
        assert ProposerResponse.from_record(u, rec) == resp
    assert decode_model(u, encode_model(h)) == h


def test_decode_model_rejects_unknown_atom(drawer):
    dom, _ = drawer
    with pytest.raises(ProtocolError):
        decode_model(dom.universe, {"name": "x", "pre": ["Flying(pig)"], "add": [], "del": []})


# -- external adapters -----------------------------------------------------------


def _external(mode, timeout=10.0):
    return ExternalProposer(SubprocessTransport([sys.executable, str(ADAPTER), mode], timeout), timeout)


def test_external_valid_adapter_grounds_lamp():
    dom, ts = load_bundled("lamp")
    ext = _external("valid")
    try:
        suite = make_suite("heuristic")
        suite.proposer, suite.sampler = ext, ext
        report = cabto_ground(GroundingProblem(ts.tasks, dom.model_space()), dom.environment(), suite)
    finally:
        ext.close()
    assert report.proposals_made > 0
    assert ext.log == []


@pytest.mark.parametrize("mode", ["invalid", "garbage", "exit"])
def test_external_defects_degrade_to_no_proposal(mode, drawer):
    dom, ts = drawer
    ext = _external(mode)
    try:
        out = ext.propose(ProposalInput("initial_proposal", ts.tasks, dom.model_space(), frozenset()))
    finally:
        ext.close()
    assert out == []
    assert len(ext.log) == 1


def test_external_unknown_policy_falls_back(drawer):
    dom, _ = drawer
    ext = _external("unknown-policy")
    h = make_model(dom.universe, "Open", [], ["IsOpen(drawer)"])
    try:
        choice = ext.sample(SampleInput(h, tuple(dom.environment().catalog())))
    finally:
        ext.close()
    assert choice.policy_id in {pid for pid, _ in dom.environment().catalog()}
    assert "unknown policy id" in ext.log[0]


def test_external_timeout_is_reported(drawer):
    dom, ts = drawer
    ext = _external("sleep", timeout=0.5)
    try:
        out = ext.propose(ProposalInput("initial_proposal", ts.tasks, dom.model_space(), frozenset()))
    finally:
        ext.close()
    assert out == [] and "timed out" in ext.log[0]


def test_external_spec_parsing():
    with pytest.raises(ValueError):
        ExternalProposer.from_spec("ftp://nowhere")
    with pytest.raises(ValueError):
        make_suite("wizard")
