"""The space of valid action models H_P, enumerated lazily in canonical order.

Canonical order is lexicographic on ``(pre, add, del)`` read as integers,
i.e. the nested ``for pre, for add, for del`` loop over the power set of the
universe with invalid triples skipped. Materialising the space is hopeless
beyond a handful of atoms (``6**n`` triples under the add/del rule alone), so
everything here is a generator or a closed-form count.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import product
from typing import Iterator, Optional, Sequence

from .symbolic import ActionModel, DomainUniverse, StateSet, ValidityRules, is_valid_key

Key = tuple[int, int, int]


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask`` in increasing numeric order, starting at 0."""
    x = 0
    while True:
        yield x
        if x == mask:
            return
        x = ((x | ~mask) + 1) & mask


def _atom_roles(rules: ValidityRules) -> list[tuple[int, int, int]]:
    roles = []
    for p, a, d in product((0, 1), repeat=3):
        if a and d:
            continue
        if rules.add_pre_disjoint and a and p:
            continue
        if rules.del_subset_pre and d and not p:
            continue
        roles.append((p, a, d))
    return roles


def _component_count(atoms: list[int], groups: list[int], roles: list[tuple[int, int, int]]) -> int:
    """Valid role assignments for one mutex component.

    Atoms are placed left to right; the state is which groups already hold a
    pre, add or post member, and a group's flags are dropped after its last atom.
    """
    last = {gi: max(i for i, a in enumerate(atoms) if g >> a & 1) for gi, g in enumerate(groups)}
    member = [[gi for gi, g in enumerate(groups) if g >> a & 1] for a in atoms]

    @lru_cache(maxsize=None)
    def count(i: int, used: tuple[int, ...]) -> int:
        if i == len(atoms):
            return 1
        total = 0
        for p, a, d in roles:
            post = (p and not d) or a
            mark = p | a << 1 | post << 2
            flags = list(used)
            ok = True
            for gi in member[i]:
                if flags[gi] & mark:
                    ok = False
                    break
                flags[gi] |= mark
            if not ok:
                continue
            for gi in member[i]:
                if last[gi] == i:
                    flags[gi] = 0
            total += count(i + 1, tuple(flags))
        return total

    return count(0, (0,) * len(groups))


def model_name(universe: DomainUniverse, key: Key) -> str:
    """Deterministic name for an anonymous triple, e.g. ``m_3_4_1``."""
    return "m_{}_{}_{}".format(*key)


class ModelSpace:
    """Valid models over a universe, optionally restricted to an explicit list."""

    def __init__(
        self,
        universe: DomainUniverse,
        rules: ValidityRules = ValidityRules(),
        explicit: Optional[Sequence[ActionModel]] = None,
    ):
        self.universe = universe
        self.rules = rules
        self.explicit = None if explicit is None else tuple(explicit)
        self._size: Optional[int] = None

    def is_valid(self, key: Key) -> bool:
        if not is_valid_key(*key, self.rules):
            return False
        if self.explicit is not None:
            return any(m.key == key for m in self.explicit)
        full = self.universe.full_bits
        return all(0 <= k and k & ~full == 0 for k in key)

    def candidate_count(self) -> int:
        """Size of the raw grid the naive enumeration walks: ``2**n * 3**n``."""
        n = self.universe.n
        return 2**n * 3**n

    def iter_keys(self) -> Iterator[Key]:
        if self.explicit is not None:
            seen = set()
            for m in self.explicit:
                if m.key not in seen and is_valid_key(*m.key, self.rules):
                    seen.add(m.key)
                    yield m.key
            return
        full = self.universe.full_bits
        rules = self.rules
        for pre in range(full + 1):
            add_mask = full & ~pre if rules.add_pre_disjoint else full
            for add in submasks(add_mask):
                del_mask = (pre if rules.del_subset_pre else full) & ~add
                for dele in submasks(del_mask):
                    if not rules.mutex_groups or is_valid_key(pre, add, dele, rules):
                        yield (pre, add, dele)

    def iter_models(self) -> Iterator[ActionModel]:
        u = self.universe
        names = {m.key: m.name for m in self.explicit} if self.explicit is not None else {}
        for key in self.iter_keys():
            name = names.get(key) or model_name(u, key)
            yield ActionModel(name, StateSet(u, key[0]), StateSet(u, key[1]), StateSet(u, key[2]))

    def size(self) -> int:
        """Exact ``|H_P|``.

        Without mutex groups every atom picks a role independently, so the
        count is ``roles ** n``. Mutex groups couple atoms only inside
        connected components of the group hypergraph; those components are
        enumerated and the rest multiplied in.
        """
        if self._size is not None:
            return self._size
        if self.explicit is not None:
            self._size = sum(1 for _ in self.iter_keys())
            return self._size
        roles = _atom_roles(self.rules)
        groups = [g for g in self.rules.mutex_masks() if g]
        n = self.universe.n
        # union-find over atoms joined by shared groups
        parent = list(range(n))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for g in groups:
            idx = [i for i in range(n) if g >> i & 1]
            for i in idx[1:]:
                parent[find(i)] = find(idx[0])
        comps: dict[int, list[int]] = {}
        for g in groups:
            for i in range(n):
                if g >> i & 1:
                    comps.setdefault(find(i), [])
        for i in range(n):
            r = find(i)
            if r in comps:
                comps[r].append(i)
        free = n - sum(len(v) for v in comps.values())
        total = len(roles) ** free
        for atoms in comps.values():
            local_groups = [g for g in groups if any(g >> a & 1 for a in atoms)]
            total *= _component_count(atoms, local_groups, roles)
        self._size = total
        return total
