import pytest
from hypothesis import given, strategies as st

from btground.domains import bundled_names, load_bundled
from btground.modelspace import ModelSpace, submasks
from btground.symbolic import ADD_DEL_ONLY, DomainUniverse, ValidityRules, make_model
from oracles import brute_force_count


def _universe(n):
    return DomainUniverse([f"p{i}" for i in range(n)])


# [DERIVED] 6**n, confirmed by brute force below
@pytest.mark.parametrize("n,expected", [(1, 6), (2, 36), (3, 216)])
def test_add_del_only_counts(n, expected):
    space = ModelSpace(_universe(n), ADD_DEL_ONLY)
    assert space.size() == expected
    assert sum(1 for _ in space.iter_keys()) == expected
    assert brute_force_count([f"p{i}" for i in range(n)], False, False) == expected


@pytest.mark.parametrize("n", [1, 2, 3])
def test_default_rules_count_is_four_to_the_n(n):
    space = ModelSpace(_universe(n))
    assert space.size() == 4**n == brute_force_count([f"p{i}" for i in range(n)])


def test_candidate_count_is_raw_grid():
    assert ModelSpace(_universe(3)).candidate_count() == 2**3 * 3**3


@given(st.integers(0, 255))
def test_submasks_enumerates_every_subset_once(mask):
    subs = list(submasks(mask))
    assert len(subs) == len(set(subs)) == 2 ** bin(mask).count("1")
    assert all(s & ~mask == 0 for s in subs)


@given(
    st.integers(1, 4),
    st.booleans(),
    st.booleans(),
    st.lists(st.lists(st.integers(0, 3), min_size=2, max_size=3, unique=True), max_size=2),
)
def test_size_and_iteration_agree_with_brute_force(n, apd, dsp, raw_groups):
    atoms = [f"p{i}" for i in range(n)]
    groups = [g for g in ({atoms[i] for i in grp if i < n} for grp in raw_groups) if len(g) > 1]
    u = _universe(n)
    rules = ValidityRules(apd, dsp, tuple(u.state(sorted(g)) for g in groups))
    space = ModelSpace(u, rules)
    expected = brute_force_count(atoms, apd, dsp, [frozenset(g) for g in groups])
    keys = list(space.iter_keys())
    assert space.size() == len(keys) == len(set(keys)) == expected
    assert keys == sorted(keys)


def test_large_mutex_component_is_counted_exactly():
    # 12 atoms in one chained component; brute force would need 4**12 triples
    n = 12
    u = _universe(n)
    groups = tuple(u.state([f"p{i}", f"p{i + 1}"]) for i in range(n - 1))
    size = ModelSpace(u, ValidityRules(mutex_groups=groups)).size()
    small = ModelSpace(_universe(4), ValidityRules(mutex_groups=tuple(_universe(4).state([f"p{i}", f"p{i + 1}"]) for i in range(3))))
    assert small.size() == brute_force_count(
        [f"p{i}" for i in range(4)], mutex=[frozenset({f"p{i}", f"p{i + 1}"}) for i in range(3)]
    )
    assert 0 < size < 4**n


def test_explicit_space_keeps_names_and_drops_invalid():
    u = _universe(2)
    good = make_model(u, "Open", add=["p0"])
    bad = make_model(u, "Bad", pre=["p1"], add=["p1"])
    space = ModelSpace(u, ValidityRules(), [good, bad, good])
    assert [m.name for m in space.iter_models()] == ["Open"]
    assert space.size() == 1
    assert space.is_valid(good.key) and not space.is_valid(bad.key)


def test_is_valid_rejects_foreign_bits():
    space = ModelSpace(_universe(2))
    assert not space.is_valid((0, 1 << 5, 0))


@pytest.mark.parametrize("name", ["drawer", "lamp"])
def test_bundled_small_domains_match_brute_force(name):
    dom, _ = load_bundled(name)
    atoms = [str(p) for p in dom.universe.propositions]
    mutex = [frozenset(g.atoms()) for g in dom.rules.mutex_groups]
    expected = brute_force_count(atoms, dom.rules.add_pre_disjoint, dom.rules.del_subset_pre, mutex)
    assert dom.model_space().size() == expected


def test_every_bundled_domain_has_a_countable_space():
    for name in bundled_names():
        dom, _ = load_bundled(name)
        assert dom.model_space().size() > 0
