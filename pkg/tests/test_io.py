import json

import pytest
from hypothesis import given, strategies as st

from btground.domains import bundled_names, bundled_path, fixture_names, load_bundled
from btground.errors import ParseError
from btground.grounding import GroundingConfig
from btground.harness import ground_file
from btground.io import parse_bt, parse_domain, parse_taskset, render_bt, render_dot, serialize_domain, serialize_taskset
from btground.io.results import parse_results, serialize_results
from btground.symbolic import Action, Condition, DomainUniverse, Fallback, Sequence, StateSet

ALL = bundled_names() + fixture_names()


def test_drawer_universe_atoms(drawer):
    dom, ts = drawer
    names = [str(p) for p in dom.universe.propositions]
    assert len(names) == 4
    assert "IsOpen(drawer)" in names and "In(apple,drawer)" in names
    assert [t.id for t in ts.tasks] == ["grab", "stow", "stow_open"]


def test_bundled_registry():
    assert set(bundled_names()) >= {"drawer", "lamp", "cover", "blocks", "pour", "handover", "storage", "tidy", "cook"}
    assert "putin_missing_open" in fixture_names()
    with pytest.raises(FileNotFoundError):
        bundled_path("atlantis")


@pytest.mark.parametrize("name", ALL)
def test_domain_and_taskset_round_trip(name):
    dom, ts = load_bundled(name)
    text = serialize_domain(dom)
    again = parse_domain(text)
    assert again == dom
    assert serialize_domain(again) == text
    ts_text = serialize_taskset(ts)
    assert parse_taskset(ts_text, dom.universe) == ts


@pytest.mark.parametrize("name", ALL)
def test_bundled_domains_are_well_formed(name):
    dom, ts = load_bundled(name)
    assert dom.universe.n <= 12
    assert dom.policies and ts.tasks
    for t in ts.tasks:
        assert not t.g <= t.s0


BAD_DOMAINS = [
    ("[universe]\nP(a) P(a\n", 2, 9),
    ("[universe]\nP(a)\n[bogus]\n", 3, 1),
    ("[universe]\nP(a)\n[policy x]\npre = Q(a)\n", 4, 7),
    ("[universe]\nP(a)\n[rules]\nfrobnicate = true\n", 4, 1),
    ("[universe]\nP(a) P(a)\n", 2, 6),
    ("[domain]\nname = x\n", 1, 1),
]


@pytest.mark.parametrize("text,line,column", BAD_DOMAINS)
def test_parse_errors_carry_line_and_column(text, line, column):
    with pytest.raises(ParseError) as err:
        parse_domain(text, "bad.domain")
    assert (err.value.line, err.value.column) == (line, column)
    assert "bad.domain" in str(err.value)


def test_taskset_errors_carry_location(drawer):
    dom, _ = drawer
    with pytest.raises(ParseError) as err:
        parse_taskset("[taskset]\nname = t\n\n[task a]\ns0 = OnTable(apple)\ng = Flying(apple)\n", dom.universe)
    assert err.value.line == 6 and err.value.column >= 5


def test_bt_text_golden(drawer):
    dom, _ = drawer
    u = dom.universe
    tree = Fallback(
        (
            Condition(u.state(["In(apple,drawer)"])),
            Sequence((Condition(u.state(["Holding(apple)", "IsOpen(drawer)"])), Action("PutIn"))),
        )
    )
    text = render_bt(tree)
    assert text == "?\n  {In(apple,drawer)}\n  ->\n    {Holding(apple), IsOpen(drawer)}\n    PutIn\n"
    assert parse_bt(text, u) == tree
    assert render_dot(tree).startswith("digraph bt {")


def _trees(u):
    leaves = st.one_of(
        st.integers(0, (1 << u.n) - 1).map(lambda b: Condition(StateSet(u, b))),
        st.sampled_from(["Pick", "PutIn'", "m_1_2_0", "open-door"]).map(Action),
    )
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            st.lists(kids, min_size=1, max_size=3).map(lambda c: Sequence(tuple(c))),
            st.lists(kids, min_size=1, max_size=3).map(lambda c: Fallback(tuple(c))),
        ),
        max_leaves=12,
    )


@given(st.data())
def test_bt_round_trip_random_trees(data):
    u = DomainUniverse(["A", "B(x)", "C(x,y)"])
    tree = data.draw(_trees(u))
    assert parse_bt(render_bt(tree), u) == tree


@pytest.mark.parametrize(
    "text,line",
    [("?\n", 1), ("?\n   {A}\n", 2), ("{Nope}\n", 1), ("?\n  {A}\nPick\n", 3), ("", 1), ("?\n  {A\n", 2)],
)
def test_bt_parse_errors(text, line):
    u = DomainUniverse(["A"])
    with pytest.raises(ParseError) as err:
        parse_bt(text, u)
    assert err.value.line == line and err.value.column >= 1


@pytest.mark.parametrize("algorithm,proposer", [("naive", "exhaustive"), ("cabto", "heuristic")])
def test_results_round_trip(algorithm, proposer):
    dom, ts = load_bundled("lamp")
    rf = ground_file(dom, ts, algorithm, proposer, GroundingConfig(seed=3), runs=2)
    text = serialize_results(rf)
    back = parse_results(text)
    assert back == rf
    assert serialize_results(back) == text
    rec = json.loads(serialize_results(rf, timing=False))
    assert "timing" not in rec and rec["format"] == "btground-results"


def test_results_with_failures_round_trip():
    dom, ts = load_bundled("storage")
    rf = ground_file(dom, ts, "cabto", "random", GroundingConfig(seed=0, max_cycles=0), runs=1)
    assert not rf.runs[0].complete
    assert parse_results(serialize_results(rf)) == rf


@pytest.mark.parametrize("text", ["{", "[]", '{"format": "other"}', '{"format": "btground-results", "version": 99}'])
def test_results_rejects_foreign_files(text):
    with pytest.raises(ParseError):
        parse_results(text)
