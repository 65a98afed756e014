"""Propositions, set-valued states, STRIPS action models and BT tick semantics.

States and conditions are both :class:`StateSet` values: subsets of a finite
:class:`DomainUniverse` stored as a Python ``int`` bitmask (bit ``i`` set means
proposition ``i`` is a member). Python integers are arbitrary precision, so
there is no fixed word size; enumeration code keeps ``n`` small on its own.

Everything here is an immutable value. Ticking a tree never changes state:
an Action leaf just reports ``running`` and names itself, and the caller
(planner simulation or :mod:`btground.env`) decides what happens next.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence as Seq, Union

from .errors import DomainError, ParseError, PreconditionError

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_ARG = re.compile(r"[A-Za-z0-9_\-]+")


def parse_atom(text: str) -> tuple[str, tuple[str, ...]]:
    """Split ``Predicate(arg1,arg2)`` into its predicate and argument tuple.

    A bare ``Predicate`` has no arguments. Whitespace is not allowed anywhere
    inside an atom. Errors carry a 1-based column relative to ``text``.
    """
    m = _IDENT.match(text)
    if m is None:
        raise ParseError(f"expected predicate name in atom {text!r}", 0, 1)
    pred = m.group(0)
    pos = m.end()
    if pos == len(text):
        return pred, ()
    if text[pos] != "(":
        raise ParseError(f"unexpected character {text[pos]!r} in atom {text!r}", 0, pos + 1)
    pos += 1
    args = []
    while True:
        a = _ARG.match(text, pos)
        if a is None:
            raise ParseError(f"expected argument in atom {text!r}", 0, pos + 1)
        args.append(a.group(0))
        pos = a.end()
        if pos >= len(text):
            raise ParseError(f"unbalanced parenthesis in atom {text!r}", 0, pos + 1)
        if text[pos] == ",":
            pos += 1
            continue
        if text[pos] == ")":
            pos += 1
            break
        raise ParseError(f"unexpected character {text[pos]!r} in atom {text!r}", 0, pos + 1)
    if pos != len(text):
        raise ParseError(f"trailing characters after atom {text!r}", 0, pos + 1)
    return pred, tuple(args)


def format_atom(predicate: str, args: Seq[str]) -> str:
    return f"{predicate}({','.join(args)})" if args else predicate


@dataclass(frozen=True)
class Proposition:
    predicate: str
    args: tuple[str, ...]
    index: int

    def __str__(self) -> str:
        return format_atom(self.predicate, self.args)


AtomLike = Union[str, Proposition, int]


class DomainUniverse:
    """Ordered, immutable set of propositions plus an object catalog.

    Two universes compare equal when their atoms (in order) and object
    descriptions match, so a parsed-then-serialized domain equals the
    original.
    """

    __slots__ = ("_props", "_lookup", "_objects", "_hash")

    def __init__(self, atoms: Iterable[str], objects: Optional[Mapping[str, str]] = None):
        props = []
        lookup: dict[str, int] = {}
        for i, text in enumerate(atoms):
            pred, args = parse_atom(text)
            canon = format_atom(pred, args)
            if canon in lookup:
                raise DomainError(f"duplicate proposition {canon}")
            lookup[canon] = i
            props.append(Proposition(pred, args, i))
        if not props:
            raise DomainError("a universe needs at least one proposition")
        self._props = tuple(props)
        self._lookup = lookup
        self._objects = dict(objects or {})
        self._hash = hash(tuple(lookup))

    @property
    def n(self) -> int:
        return len(self._props)

    @property
    def propositions(self) -> tuple[Proposition, ...]:
        return self._props

    @property
    def objects(self) -> dict[str, str]:
        return dict(self._objects)

    @property
    def full_bits(self) -> int:
        return (1 << len(self._props)) - 1

    def __len__(self) -> int:
        return len(self._props)

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, DomainUniverse):
            return NotImplemented
        return self._props == other._props and self._objects == other._objects

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"DomainUniverse(n={self.n})"

    def index(self, atom: AtomLike) -> int:
        if isinstance(atom, Proposition):
            if atom.index < self.n and self._props[atom.index] == atom:
                return atom.index
            raise DomainError(f"proposition {atom} is not in this universe")
        if isinstance(atom, int):
            if 0 <= atom < self.n:
                return atom
            raise DomainError(f"proposition index {atom} out of range [0, {self.n})")
        try:
            return self._lookup[atom]
        except KeyError:
            pred, args = parse_atom(atom)
            canon = format_atom(pred, args)
            if canon in self._lookup:
                return self._lookup[canon]
            raise DomainError(f"unknown proposition {atom}") from None

    def __contains__(self, atom: object) -> bool:
        try:
            self.index(atom)  # type: ignore[arg-type]
        except (DomainError, ParseError):
            return False
        return True

    def state(self, atoms: Iterable[AtomLike] = ()) -> "StateSet":
        bits = 0
        for a in atoms:
            bits |= 1 << self.index(a)
        return StateSet(self, bits)

    def from_bits(self, bits: int) -> "StateSet":
        if bits < 0 or bits >> self.n:
            raise DomainError(f"bitmask {bits:#x} exceeds universe of {self.n} propositions")
        return StateSet(self, bits)

    def empty(self) -> "StateSet":
        return StateSet(self, 0)

    def full(self) -> "StateSet":
        return StateSet(self, self.full_bits)

    def atom_names(self, bits: int) -> list[str]:
        return [str(self._props[i]) for i in iter_bits(bits)]


def iter_bits(bits: int) -> Iterator[int]:
    """Indices of set bits in ascending order."""
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


class StateSet:
    """A subset of a universe. Used for both states and conditions."""

    __slots__ = ("universe", "bits")

    def __init__(self, universe: DomainUniverse, bits: int = 0):
        self.universe = universe
        self.bits = bits

    def _other(self, other: "StateSet") -> int:
        if not isinstance(other, StateSet):
            raise TypeError(f"expected StateSet, got {type(other).__name__}")
        if other.universe is not self.universe and other.universe != self.universe:
            raise DomainError("state sets belong to different universes")
        return other.bits

    def __or__(self, other: "StateSet") -> "StateSet":
        return StateSet(self.universe, self.bits | self._other(other))

    def __and__(self, other: "StateSet") -> "StateSet":
        return StateSet(self.universe, self.bits & self._other(other))

    def __sub__(self, other: "StateSet") -> "StateSet":
        return StateSet(self.universe, self.bits & ~self._other(other))

    def __le__(self, other: "StateSet") -> bool:
        return self.bits & ~self._other(other) == 0

    def __ge__(self, other: "StateSet") -> bool:
        return self._other(other) & ~self.bits == 0

    def issubset(self, other: "StateSet") -> bool:
        return self <= other

    def isdisjoint(self, other: "StateSet") -> bool:
        return self.bits & self._other(other) == 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateSet):
            return NotImplemented
        return self.bits == other.bits and (
            self.universe is other.universe or self.universe == other.universe
        )

    def __hash__(self) -> int:
        return hash(self.bits)

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __bool__(self) -> bool:
        return self.bits != 0

    def __contains__(self, atom: AtomLike) -> bool:
        return bool(self.bits >> self.universe.index(atom) & 1)

    def __iter__(self) -> Iterator[Proposition]:
        props = self.universe.propositions
        return (props[i] for i in iter_bits(self.bits))

    def indices(self) -> list[int]:
        return list(iter_bits(self.bits))

    def atoms(self) -> list[str]:
        return self.universe.atom_names(self.bits)

    def __repr__(self) -> str:
        return "{" + ", ".join(self.atoms()) + "}"


@dataclass(frozen=True)
class ActionModel:
    """Declared STRIPS transition ``<pre, add, del>`` (``del`` is spelled ``delete``)."""

    name: str
    pre: StateSet
    add: StateSet
    delete: StateSet

    def __post_init__(self) -> None:
        u = self.pre.universe
        for part in (self.add, self.delete):
            if part.universe is not u and part.universe != u:
                raise DomainError(f"model {self.name}: parts span different universes")

    @property
    def universe(self) -> DomainUniverse:
        return self.pre.universe

    @property
    def key(self) -> tuple[int, int, int]:
        """Canonical triple identity, independent of the name."""
        return (self.pre.bits, self.add.bits, self.delete.bits)

    def expected(self) -> StateSet:
        """``pre | add - del``: what a consistent execution must leave behind."""
        return StateSet(self.universe, (self.pre.bits | self.add.bits) & ~self.delete.bits)

    def renamed(self, name: str) -> "ActionModel":
        return ActionModel(name, self.pre, self.add, self.delete)

    def __str__(self) -> str:
        return f"{self.name}<pre={self.pre!r}, add={self.add!r}, del={self.delete!r}>"


def make_model(
    universe: DomainUniverse,
    name: str,
    pre: Iterable[AtomLike] = (),
    add: Iterable[AtomLike] = (),
    delete: Iterable[AtomLike] = (),
) -> ActionModel:
    return ActionModel(name, universe.state(pre), universe.state(add), universe.state(delete))


@dataclass(frozen=True)
class ValidityRules:
    """Domain-independent toggles plus domain-dependent mutex groups.

    ``add & del == 0`` is always enforced. A mutex group rules out any model
    whose precondition, add list, or guaranteed post-condition
    ``(pre - del) | add`` contains two atoms of the group.
    """

    add_pre_disjoint: bool = True
    del_subset_pre: bool = True
    mutex_groups: tuple[StateSet, ...] = field(default=())

    def mutex_masks(self) -> tuple[int, ...]:
        return tuple(g.bits for g in self.mutex_groups)


ADD_DEL_ONLY = ValidityRules(add_pre_disjoint=False, del_subset_pre=False)


def _multi(bits: int) -> bool:
    return bits & (bits - 1) != 0


def is_valid_key(pre: int, add: int, dele: int, rules: ValidityRules) -> bool:
    """Validity test on raw bitmasks; :func:`is_valid_model` is the typed wrapper."""
    if add & dele:
        return False
    if rules.add_pre_disjoint and add & pre:
        return False
    if rules.del_subset_pre and dele & ~pre:
        return False
    if rules.mutex_groups:
        post = (pre & ~dele) | add
        for g in rules.mutex_masks():
            if _multi(pre & g) or _multi(add & g) or _multi(post & g):
                return False
    return True


def is_valid_model(h: ActionModel, rules: ValidityRules = ValidityRules()) -> bool:
    return is_valid_key(h.pre.bits, h.add.bits, h.delete.bits, rules)


def holds(c: StateSet, s: StateSet) -> bool:
    """True iff condition ``c`` holds in state ``s`` (``c`` is a subset of ``s``)."""
    return c <= s


def apply_model(h: ActionModel, s: StateSet) -> StateSet:
    if not h.pre <= s:
        missing = h.pre - s
        raise PreconditionError(f"{h.name}: precondition not satisfied, missing {missing!r}")
    return StateSet(s.universe, (s.bits | h.add.bits) & ~h.delete.bits)


# ---------------------------------------------------------------------------
# Behavior trees
# ---------------------------------------------------------------------------


class Status(enum.Enum):
    SUCCESS = "success"
    RUNNING = "running"
    FAILURE = "failure"

    def __str__(self) -> str:
        return self.value


class BTNode:
    """Base class of the four node kinds."""

    __slots__ = ()


@dataclass(frozen=True)
class Condition(BTNode):
    condition: StateSet


@dataclass(frozen=True)
class Action(BTNode):
    name: str


@dataclass(frozen=True)
class Sequence(BTNode):
    children: tuple[BTNode, ...]

    def __post_init__(self) -> None:
        if not self.children:
            raise DomainError("a Sequence needs at least one child")


@dataclass(frozen=True)
class Fallback(BTNode):
    children: tuple[BTNode, ...]

    def __post_init__(self) -> None:
        if not self.children:
            raise DomainError("a Fallback needs at least one child")


def iter_nodes(root: BTNode) -> Iterator[BTNode]:
    """Pre-order traversal."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Sequence, Fallback)):
            stack.extend(reversed(node.children))


def action_names(root: BTNode) -> list[str]:
    """Action leaf names in pre-order, without duplicates."""
    seen: dict[str, None] = {}
    for node in iter_nodes(root):
        if isinstance(node, Action):
            seen.setdefault(node.name)
    return list(seen)


def check_actions(root: BTNode, action_table: Mapping[str, ActionModel]) -> None:
    for name in action_names(root):
        if name not in action_table:
            raise DomainError(f"action {name!r} does not resolve in the action table")


def _tick(node: BTNode, bits: int) -> tuple[Status, Optional[str]]:
    if isinstance(node, Condition):
        ok = node.condition.bits & ~bits == 0
        return (Status.SUCCESS if ok else Status.FAILURE), None
    if isinstance(node, Action):
        return Status.RUNNING, node.name
    if isinstance(node, Sequence):
        for child in node.children:
            st, act = _tick(child, bits)
            if st is not Status.SUCCESS:
                return st, act
        return Status.SUCCESS, None
    if isinstance(node, Fallback):
        for child in node.children:
            st, act = _tick(child, bits)
            if st is not Status.FAILURE:
                return st, act
        return Status.FAILURE, None
    raise TypeError(f"not a BT node: {node!r}")


def tick(
    root: BTNode, s: StateSet, action_table: Mapping[str, ActionModel]
) -> tuple[Status, Optional[str]]:
    """One top-down tick. Returns the status and the active action when running."""
    check_actions(root, action_table)
    return _tick(root, s.bits)


def bt_region(root: BTNode, s: StateSet, action_table: Mapping[str, ActionModel]) -> Status:
    """Which cell of the success/running/failure partition ``s`` falls in."""
    return tick(root, s, action_table)[0]
