import pytest
from hypothesis import given, strategies as st

from btground.errors import DomainError, ParseError, PreconditionError
from btground.symbolic import (
    ADD_DEL_ONLY,
    Action,
    ActionModel,
    Condition,
    DomainUniverse,
    Fallback,
    Sequence,
    StateSet,
    Status,
    ValidityRules,
    action_names,
    apply_model,
    bt_region,
    holds,
    is_valid_model,
    make_model,
    parse_atom,
    tick,
)
from oracles import powerset, ref_tick, valid_triple

ATOMS = ["p0", "p1", "p2"]


def test_parse_atom_forms():
    assert parse_atom("In(apple,drawer)") == ("In", ("apple", "drawer"))
    assert parse_atom("HandEmpty") == ("HandEmpty", ())


@pytest.mark.parametrize(
    "text,column",
    [("In(apple,", 10), ("In(apple drawer)", 9), ("(x)", 1), ("In(a)b", 6), ("In()", 4)],
)
def test_parse_atom_errors_carry_column(text, column):
    with pytest.raises(ParseError) as err:
        parse_atom(text)
    assert err.value.column == column


def test_universe_rejects_duplicates_and_unknown_atoms():
    with pytest.raises((DomainError, ParseError)):
        DomainUniverse(["p", "p"])
    u = DomainUniverse(["p", "q"])
    with pytest.raises((DomainError, ParseError)):
        u.state(["r"])


def test_holds_drawer_example():
    u = DomainUniverse(["Holding(apple)", "IsOpen(drawer)", "In(apple,drawer)"])
    c = u.state(["IsOpen(drawer)"])
    assert holds(c, u.state(["IsOpen(drawer)", "Holding(apple)"]))
    assert not holds(c, u.state(["Holding(apple)"]))


def test_statesets_from_different_universes_do_not_mix():
    a = DomainUniverse(["p"]).state(["p"])
    b = DomainUniverse(["q"]).state(["q"])
    with pytest.raises(DomainError):
        a | b


@given(st.integers(0, 7), st.integers(0, 7), st.integers(0, 7))
def test_set_algebra_matches_python_sets(x, y, z):
    u = DomainUniverse(ATOMS)
    a, b, c = StateSet(u, x), StateSet(u, y), StateSet(u, z)
    sa, sb = set(a.atoms()), set(b.atoms())
    assert set((a | b).atoms()) == sa | sb
    assert set((a & b).atoms()) == sa & sb
    assert set((a - b).atoms()) == sa - sb
    assert (a <= b) == (sa <= sb)
    assert ((a | b) | c) == (a | (b | c))


def test_apply_model_is_strips_transition():
    u = DomainUniverse(["p", "q", "r"])
    h = make_model(u, "a", pre=["p"], add=["q"], delete=["p"])
    assert apply_model(h, u.state(["p", "r"])) == u.state(["q", "r"])
    with pytest.raises(PreconditionError):
        apply_model(h, u.state(["r"]))


def test_validity_examples():
    u = DomainUniverse(["p0", "p1"])
    assert not is_valid_model(make_model(u, "x", add=["p0"], delete=["p0"]), ADD_DEL_ONLY)
    assert not is_valid_model(make_model(u, "x", pre=["p0"], add=["p0"]))
    assert is_valid_model(make_model(u, "x", pre=["p0"], add=["p0"]), ADD_DEL_ONLY)
    assert not is_valid_model(make_model(u, "x", delete=["p1"]))


def test_mutex_rejects_double_add():
    u = DomainUniverse(["Holding(x)", "HandEmpty"])
    rules = ValidityRules(mutex_groups=(u.state(["Holding(x)", "HandEmpty"]),))
    assert not is_valid_model(make_model(u, "x", add=["Holding(x)", "HandEmpty"]), rules)
    assert is_valid_model(make_model(u, "x", pre=["HandEmpty"], add=["Holding(x)"], delete=["HandEmpty"]), rules)
    # guaranteed post keeps HandEmpty and adds Holding(x)
    assert not is_valid_model(make_model(u, "x", pre=["HandEmpty"], add=["Holding(x)"]), rules)


@pytest.mark.parametrize("apd,dsp", [(False, False), (True, False), (False, True), (True, True)])
def test_validity_agrees_with_reference_on_all_triples(apd, dsp):
    u = DomainUniverse(ATOMS)
    groups = (frozenset({"p0", "p1"}),)
    rules = ValidityRules(apd, dsp, (u.state(["p0", "p1"]),))
    for pre in powerset(ATOMS):
        for add in powerset(ATOMS):
            for dele in powerset(ATOMS):
                h = ActionModel("h", u.state(pre), u.state(add), u.state(dele))
                assert is_valid_model(h, rules) == valid_triple(pre, add, dele, apd, dsp, groups)


def _tree(u):
    # ? {p2}  (-> {p0} a)  (-> {p1} b)
    return Fallback(
        (
            Condition(u.state(["p2"])),
            Sequence((Condition(u.state(["p0"])), Action("a"))),
            Sequence((Condition(u.state(["p1"])), Action("b"))),
        )
    )


def test_tick_partition_matches_reference_on_every_state():
    u = DomainUniverse(ATOMS)
    tree = _tree(u)
    table = {"a": make_model(u, "a", add=["p2"]), "b": make_model(u, "b", add=["p0"])}
    seen = set()
    for s in powerset(ATOMS):
        status, act = tick(tree, u.state(s), table)
        assert (status.value, act) == ref_tick(tree, s)
        assert bt_region(tree, u.state(s), table) is status
        seen.add(status)
    assert seen == {Status.SUCCESS, Status.RUNNING, Status.FAILURE}


def test_tick_running_state_from_inner_sequence():
    u = DomainUniverse(ATOMS)
    table = {"a": make_model(u, "a", add=["p2"]), "b": make_model(u, "b", add=["p0"])}
    assert tick(_tree(u), u.state(["p0"]), table) == (Status.RUNNING, "a")


def test_tick_rejects_unbound_action():
    u = DomainUniverse(ATOMS)
    with pytest.raises(DomainError):
        tick(_tree(u), u.state([]), {"a": make_model(u, "a", add=["p2"])})


def test_empty_control_nodes_rejected():
    with pytest.raises(DomainError):
        Sequence(())
    with pytest.raises(DomainError):
        Fallback(())


def test_action_names_preorder_unique():
    u = DomainUniverse(ATOMS)
    tree = Sequence((Action("b"), _tree(u), Action("b")))
    assert action_names(tree) == ["b", "a"]


def _trees(u):
    leaves = st.one_of(
        st.builds(lambda b: Condition(StateSet(u, b)), st.integers(0, 7)),
        st.sampled_from(["a", "b"]).map(Action),
    )
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.lists(kids, min_size=1, max_size=3).map(lambda c: Sequence(tuple(c))),
            st.lists(kids, min_size=1, max_size=3).map(lambda c: Fallback(tuple(c))),
        ),
        max_leaves=10,
    )


@given(st.data())
def test_tick_matches_reference_on_random_trees(data):
    u = DomainUniverse(ATOMS)
    tree = data.draw(_trees(u))
    s = data.draw(st.integers(0, 7))
    table = {"a": make_model(u, "a"), "b": make_model(u, "b")}
    status, act = tick(tree, StateSet(u, s), table)
    assert (status.value, act) == ref_tick(tree, frozenset(StateSet(u, s).atoms()))
