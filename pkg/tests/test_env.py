import numpy as np
import pytest
from hypothesis import given, strategies as st

from btground.env import (
    ControlPolicy,
    SimEnvironment,
    check_consistency_outcome,
    derive_seed,
    redact_hidden,
)
from btground.errors import DomainError, HiddenFieldAccess, UnsatisfiableScenarioError
from btground.planner import Task, bt_expansion
from btground.symbolic import DomainUniverse, Status, ValidityRules, make_model
from btground.system import GroundedAction


def _env(u, policies, rules=ValidityRules(), fill=0.5):
    return SimEnvironment(u, policies, rules, fill)


def _policy(u, pid, pre=(), add=(), delete=(), **kw):
    return ControlPolicy(pid, u.state(pre), u.state(add), u.state(delete), **kw)


@pytest.fixture
def u3():
    return DomainUniverse(["p0", "p1", "p2"])


def test_scenario_contains_precondition_over_many_seeds(u3):
    env = _env(u3, [])
    h = make_model(u3, "h", pre=["p0"], add=["p1"])
    assert env.sample_scenario(h, seed=42).s0 >= u3.state(["p0"])
    assert all(env.sample_scenario(h, seed=s).s0 >= h.pre for s in range(1000))


def test_scenario_fill_rate_and_determinism(u3):
    env = _env(u3, [])
    h = make_model(u3, "h")
    draws = [env.sample_scenario(h, seed=s).s0 for s in range(4000)]
    rate = np.mean([u3.state(["p1"]) <= s for s in draws])
    assert abs(rate - 0.5) < 0.03
    assert env.sample_scenario(h, seed=7) == env.sample_scenario(h, seed=7)


def test_scenario_respects_mutex_and_protects_pre():
    u = DomainUniverse(["Holding(x)", "HandEmpty", "Lit"])
    rules = ValidityRules(mutex_groups=(u.state(["Holding(x)", "HandEmpty"]),))
    env = _env(u, [], rules, fill=1.0)
    h = make_model(u, "h", pre=["HandEmpty"], add=["Lit"])
    s0 = env.sample_scenario(h, seed=1).s0
    assert s0 == u.state(["HandEmpty", "Lit"])
    bad = make_model(u, "bad", pre=["Holding(x)", "HandEmpty"])
    with pytest.raises(UnsatisfiableScenarioError):
        env.sample_scenario(bad, seed=1)


def test_missing_hidden_precondition_has_no_effect(drawer):
    dom, _ = drawer
    env = dom.environment()
    u = dom.universe
    s0 = u.state(["Holding(apple)"])
    s_t, ctx = env.execute("put_in", s0, seed=0)
    assert s_t == s0
    assert ctx.ticks_elapsed == 0 and "precondition" in ctx.note


def test_execute_applies_hidden_transition(drawer):
    dom, _ = drawer
    u = dom.universe
    s_t, ctx = dom.environment().execute("put_in", u.state(["Holding(apple)", "IsOpen(drawer)"]), seed=0)
    assert s_t == u.state(["IsOpen(drawer)", "In(apple,drawer)"])
    assert ctx.ticks_elapsed == 2


def test_failure_probability_monte_carlo(u3):
    # [DERIVED] binomial: sd of the mean over 10000 runs is 0.005
    pol = _policy(u3, "flaky", add=["p1"], failure_prob=0.5)
    env = _env(u3, [pol])
    rng = np.random.default_rng(123)
    s0 = u3.state([])
    hits = sum(env.execute("flaky", s0, rng)[0] == u3.state(["p1"]) for _ in range(10000))
    assert abs(hits / 10000 - 0.5) <= 0.02


def test_literal_check_ignores_deleted_atoms():
    u = DomainUniverse(["p", "q"])
    h = make_model(u, "h", pre=["p"], add=["q"], delete=["p"])
    s_t = u.state(["p", "q"])
    assert check_consistency_outcome(h, s_t)
    assert not check_consistency_outcome(h, s_t, strict=True, s0=u.state(["p"]))
    assert check_consistency_outcome(h, u.state(["q"]), strict=True, s0=u.state(["p"]))
    with pytest.raises(ValueError):
        check_consistency_outcome(h, s_t, strict=True)


def test_validate_replays_identically(drawer):
    dom, _ = drawer
    env = dom.environment()
    h = make_model(dom.universe, "PutIn", ["Holding(apple)"], ["In(apple,drawer)"], ["Holding(apple)"])
    a = env.validate_consistency(h, "put_in", 4, seed=99)
    b = env.validate_consistency(h, "put_in", 4, seed=99)
    assert a == b


def test_validate_needs_positive_k(drawer):
    dom, _ = drawer
    h = make_model(dom.universe, "x")
    with pytest.raises(ValueError):
        dom.environment().validate_consistency(h, "put_in", 0)
    with pytest.raises(DomainError):
        dom.environment().validate_consistency(h, "nope", 1)


@pytest.mark.parametrize("k,expected", [(1, 0.5), (8, 0.5**8)])
def test_false_accept_rate_of_half_failing_policy(u3, k, expected):
    # [DERIVED] 0.5**K: every one of the K trials must dodge the failure.
    # fill 0 keeps p1 out of s0, so a failed run is always visible.
    pol = _policy(u3, "flaky", add=["p1"], failure_prob=0.5)
    env = _env(u3, [pol], fill=0.0)
    h = make_model(u3, "h", add=["p1"])
    runs = 4000
    accepted = sum(env.validate_consistency(h, "flaky", k, seed=s)[0] for s in range(runs))
    assert abs(accepted / runs - expected) <= 0.02


def test_strict_boundary_trials_catch_missing_pre_every_time(drawer):
    dom, _ = drawer
    env = dom.environment()
    h = make_model(dom.universe, "PutIn", ["Holding(apple)"], ["In(apple,drawer)"], ["Holding(apple)"])
    assert not any(env.validate_consistency(h, "put_in", 4, seed=s, strict=True)[0] for s in range(50))


@given(st.integers(0, 2**31), st.booleans())
def test_consistent_pairs_are_never_rejected(seed, strict):
    u = DomainUniverse(["a", "b", "c", "d"])
    pol = _policy(u, "pi", pre=["a"], add=["b"], delete=["a"])
    env = _env(u, [pol])
    h = make_model(u, "h", pre=["a"], add=["b"], delete=["a"])
    assert env.validate_consistency(h, "pi", 4, seed=seed, strict=strict)[0]


def test_redaction_blocks_hidden_reads_but_not_execution(drawer):
    dom, _ = drawer
    env = dom.environment()
    pol = env.policy("put_in")
    with redact_hidden():
        with pytest.raises(HiddenFieldAccess):
            pol.hidden_pre
        s_t, _ = env.execute("pick_apple", dom.universe.state(["OnTable(apple)"]), seed=0)
    assert s_t == dom.universe.state(["Holding(apple)"])
    assert pol.hidden_pre == dom.universe.state(["Holding(apple)", "IsOpen(drawer)"])


def test_policy_constructor_rejects_bad_values(u3):
    with pytest.raises(DomainError):
        _policy(u3, "x", add=["p0"], delete=["p0"])
    with pytest.raises(DomainError):
        _policy(u3, "x", duration_ticks=0)
    with pytest.raises(DomainError):
        _policy(u3, "x", failure_prob=1.5)
    with pytest.raises(DomainError):
        _env(u3, [_policy(u3, "x"), _policy(u3, "x")])


def test_derive_seed_is_stable_and_separates_parts():
    assert derive_seed(1, "a", (1, 2)) == derive_seed(1, "a", (1, 2))
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert derive_seed(1, "a") != derive_seed(2, "a")


def _drawer_bindings(dom, put_pre):
    u = dom.universe
    models = {
        "Pick": ("pick_apple", make_model(u, "Pick", ["OnTable(apple)"], ["Holding(apple)"], ["OnTable(apple)"])),
        "Open": ("open_drawer", make_model(u, "Open", [], ["IsOpen(drawer)"])),
        "PutIn": ("put_in", make_model(u, "PutIn", put_pre, ["In(apple,drawer)"], ["Holding(apple)"])),
    }
    return {name: GroundedAction(h, pid, 0) for name, (pid, h) in models.items()}


def test_execute_bt_end_to_end(drawer):
    dom, ts = drawer
    bindings = _drawer_bindings(dom, ["Holding(apple)", "IsOpen(drawer)"])
    task = ts.tasks[1]
    tree = bt_expansion(task, [b.model for b in bindings.values()]).solution
    trace = dom.environment().execute_bt(tree, task.s0, bindings, seed=0)
    assert trace.succeeded and trace.final_state >= task.g
    assert trace.executions == 3


def test_execute_bt_with_inconsistent_action_does_not_succeed(drawer):
    dom, ts = drawer
    bindings = _drawer_bindings(dom, ["Holding(apple)"])
    task = Task("stow", ts.tasks[1].s0, ts.tasks[1].g)
    tree = bt_expansion(task, [b.model for b in bindings.values()]).solution
    trace = dom.environment().execute_bt(tree, task.s0, bindings, tick_budget=20, seed=0)
    assert trace.status in (Status.FAILURE, Status.RUNNING)
    assert not trace.succeeded


def test_execute_bt_rejects_unbound_action(drawer):
    dom, ts = drawer
    bindings = _drawer_bindings(dom, ["Holding(apple)", "IsOpen(drawer)"])
    tree = bt_expansion(ts.tasks[1], [b.model for b in bindings.values()]).solution
    del bindings["Open"]
    with pytest.raises(DomainError):
        dom.environment().execute_bt(tree, ts.tasks[1].s0, bindings)
