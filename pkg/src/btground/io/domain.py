"""Domain and task-set files.

Both formats are sectioned plain text. ``#`` starts a comment line. Atoms
use the ``Predicate(arg1,arg2)`` grammar and are whitespace separated::

    [domain]
    name = drawer

    [universe]
    Holding(apple) HandEmpty
    OnTable(apple) IsOpen(drawer) In(apple,drawer)

    [objects]
    apple = a red apple

    [mutex]
    Holding(apple) HandEmpty

    [rules]
    add_pre_disjoint = true
    del_subset_pre = true
    explicit_model_space = false
    fill_prob = 0.5

    [policy put_in]
    description = putin-style: place the held apple into the open drawer
    pre = Holding(apple) IsOpen(drawer)
    add = In(apple,drawer) HandEmpty
    del = Holding(apple)
    duration = 3
    failure_prob = 0.0

    [model PutIn]
    pre = Holding(apple)
    add = In(apple,drawer)
    del = Holding(apple)

A task set names its domain and lists tasks::

    [taskset]
    name = drawer
    domain = drawer.domain

    [task stow]
    s0 = HandEmpty OnTable(apple)
    g = In(apple,drawer)

Serialization is canonical (atoms in universe order, fixed section and key
order), so ``parse(serialize(x)) == x`` and fixtures diff cleanly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from ..env import ControlPolicy, SimEnvironment, _env_access
from ..errors import DomainError, ParseError
from ..modelspace import ModelSpace
from ..planner import Task
from ..symbolic import ActionModel, DomainUniverse, StateSet, ValidityRules, format_atom, parse_atom

_HEADER = re.compile(r"\[\s*([A-Za-z_]+)(?:\s+([^\]\s]+))?\s*\]\s*$")
_TOKEN = re.compile(r"\S+")


@dataclass
class _Entry:
    key: str
    value: str
    line: int
    col: int  # 1-based column where the value starts


@dataclass
class _Section:
    kind: str
    name: Optional[str]
    line: int
    entries: list[_Entry] = field(default_factory=list)
    raw: list[tuple[int, str]] = field(default_factory=list)

    def get(self, key: str) -> Optional[_Entry]:
        for e in self.entries:
            if e.key == key:
                return e
        return None


_RAW_SECTIONS = {"universe", "mutex"}


def _split_sections(text: str, source: str) -> list[_Section]:
    sections: list[_Section] = []
    current: Optional[_Section] = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if m is None:
                raise ParseError(f"malformed section header {stripped!r}", lineno, line.index("[") + 1, source)
            current = _Section(m.group(1), m.group(2), lineno)
            sections.append(current)
            continue
        if current is None:
            raise ParseError("content before the first section header", lineno, 1, source)
        if current.kind in _RAW_SECTIONS:
            current.raw.append((lineno, line))
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", lineno, len(line) - len(line.lstrip()) + 1, source)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        if current.get(key) is not None:
            raise ParseError(f"duplicate key {key!r}", lineno, line.index(key) + 1, source)
        value = value_part.strip()
        col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        current.entries.append(_Entry(key, value, lineno, col))
    return sections


def _tokens(line: str, col0: int = 1) -> list[tuple[str, int]]:
    return [(m.group(0), col0 + m.start()) for m in _TOKEN.finditer(line)]


def _atoms(universe: DomainUniverse, entry: Optional[_Entry], source: str) -> StateSet:
    if entry is None:
        return universe.empty()
    bits = 0
    for tok, col in _tokens(entry.value, entry.col):
        try:
            pred, args = parse_atom(tok)
        except ParseError as err:
            raise ParseError(err.message, entry.line, col + max(err.column - 1, 0), source) from None
        atom = format_atom(pred, args)
        if atom not in universe:
            raise ParseError(f"unknown atom {atom}", entry.line, col, source)
        bits |= 1 << universe.index(atom)
    return universe.from_bits(bits)


_TRUE = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _bool(entry: Optional[_Entry], default: bool, source: str) -> bool:
    if entry is None:
        return default
    try:
        return _TRUE[entry.value.lower()]
    except KeyError:
        raise ParseError(f"expected true/false, got {entry.value!r}", entry.line, entry.col, source) from None


def _number(entry: Optional[_Entry], default, kind, source: str):
    if entry is None:
        return default
    try:
        return kind(entry.value)
    except ValueError:
        raise ParseError(f"expected a number, got {entry.value!r}", entry.line, entry.col, source) from None


@dataclass(frozen=True)
class DomainFile:
    name: str
    universe: DomainUniverse
    rules: ValidityRules
    policies: tuple[ControlPolicy, ...] = ()
    models: tuple[ActionModel, ...] = ()
    explicit_model_space: bool = False
    fill_prob: float = 0.5
    description: str = ""

    def environment(self) -> SimEnvironment:
        return SimEnvironment(self.universe, self.policies, self.rules, self.fill_prob)

    def model_space(self) -> ModelSpace:
        return ModelSpace(self.universe, self.rules, self.models if self.explicit_model_space else None)


@dataclass(frozen=True)
class TaskSetFile:
    name: str
    domain: str
    tasks: tuple[Task, ...]


def _check_disjoint(add: StateSet, dele: StateSet, entry: Optional[_Entry], what: str, source: str) -> None:
    if add.bits & dele.bits:
        line, col = (entry.line, entry.col) if entry else (0, 0)
        raise ParseError(f"{what}: add and del overlap on {(add & dele).atoms()}", line, col, source)


def parse_domain(text: str, source: str = "<domain>") -> DomainFile:
    sections = _split_sections(text, source)
    by_kind: dict[str, list[_Section]] = {}
    for s in sections:
        by_kind.setdefault(s.kind, []).append(s)
    known = {"domain", "universe", "objects", "mutex", "rules", "policy", "model"}
    for s in sections:
        if s.kind not in known:
            raise ParseError(f"unknown section [{s.kind}]", s.line, 1, source)
        if s.kind in {"domain", "universe", "objects", "mutex", "rules"} and len(by_kind[s.kind]) > 1:
            raise ParseError(f"section [{s.kind}] appears twice", by_kind[s.kind][1].line, 1, source)
    if "universe" not in by_kind:
        raise ParseError("missing [universe] section", 1, 1, source)

    atoms: list[str] = []
    seen: dict[str, tuple[int, int]] = {}
    for lineno, line in by_kind["universe"][0].raw:
        for tok, col in _tokens(line):
            try:
                pred, args = parse_atom(tok)
            except ParseError as err:
                raise ParseError(err.message, lineno, col + max(err.column - 1, 0), source) from None
            atom = format_atom(pred, args)
            if atom in seen:
                raise ParseError(f"duplicate proposition {atom}", lineno, col, source)
            seen[atom] = (lineno, col)
            atoms.append(atom)
    if not atoms:
        raise ParseError("universe is empty", by_kind["universe"][0].line, 1, source)

    objects = {}
    for sec in by_kind.get("objects", []):
        for e in sec.entries:
            objects[e.key] = e.value
    universe = DomainUniverse(atoms, objects)

    groups = []
    for sec in by_kind.get("mutex", []):
        for lineno, line in sec.raw:
            bits = 0
            for tok, col in _tokens(line):
                entry = _Entry("mutex", tok, lineno, col)
                bits |= _atoms(universe, entry, source).bits
            groups.append(universe.from_bits(bits))

    rules_sec = by_kind.get("rules", [None])[0]
    get = rules_sec.get if rules_sec else (lambda key: None)
    for e in rules_sec.entries if rules_sec else []:
        if e.key not in {"add_pre_disjoint", "del_subset_pre", "explicit_model_space", "fill_prob"}:
            raise ParseError(f"unknown rule {e.key!r}", e.line, 1, source)
    rules = ValidityRules(
        add_pre_disjoint=_bool(get("add_pre_disjoint"), True, source),
        del_subset_pre=_bool(get("del_subset_pre"), True, source),
        mutex_groups=tuple(groups),
    )
    explicit = _bool(get("explicit_model_space"), False, source)
    fill_prob = _number(get("fill_prob"), 0.5, float, source)

    name_sec = by_kind.get("domain", [None])[0]
    name = ""
    description = ""
    if name_sec is not None:
        e = name_sec.get("name")
        name = e.value if e else ""
        e = name_sec.get("description")
        description = e.value if e else ""

    policies = []
    pids: set[str] = set()
    for sec in by_kind.get("policy", []):
        if not sec.name:
            raise ParseError("policy section needs an id: [policy <id>]", sec.line, 1, source)
        if sec.name in pids:
            raise ParseError(f"duplicate policy {sec.name}", sec.line, 1, source)
        pids.add(sec.name)
        pre = _atoms(universe, sec.get("pre"), source)
        add = _atoms(universe, sec.get("add"), source)
        dele = _atoms(universe, sec.get("del"), source)
        _check_disjoint(add, dele, sec.get("del") or sec.get("add"), f"policy {sec.name}", source)
        desc = sec.get("description")
        duration = _number(sec.get("duration"), 1, int, source)
        fprob = _number(sec.get("failure_prob"), 0.0, float, source)
        try:
            policies.append(
                ControlPolicy(
                    sec.name,
                    pre,
                    add,
                    dele,
                    description=desc.value if desc else "",
                    duration_ticks=duration,
                    failure_prob=fprob,
                    failure_add=_atoms(universe, sec.get("failure_add"), source),
                    failure_del=_atoms(universe, sec.get("failure_del"), source),
                )
            )
        except DomainError as err:
            raise ParseError(str(err), sec.line, 1, source) from None

    models = []
    mnames: set[str] = set()
    for sec in by_kind.get("model", []):
        if not sec.name:
            raise ParseError("model section needs a name: [model <name>]", sec.line, 1, source)
        if sec.name in mnames:
            raise ParseError(f"duplicate model {sec.name}", sec.line, 1, source)
        mnames.add(sec.name)
        pre = _atoms(universe, sec.get("pre"), source)
        add = _atoms(universe, sec.get("add"), source)
        dele = _atoms(universe, sec.get("del"), source)
        _check_disjoint(add, dele, sec.get("del") or sec.get("add"), f"model {sec.name}", source)
        models.append(ActionModel(sec.name, pre, add, dele))

    return DomainFile(
        name=name,
        universe=universe,
        rules=rules,
        policies=tuple(policies),
        models=tuple(models),
        explicit_model_space=explicit,
        fill_prob=fill_prob,
        description=description,
    )


def _fmt(s: StateSet) -> str:
    return " ".join(s.atoms())


def _kv(key: str, value: str) -> str:
    return f"{key} = {value}".rstrip()


def serialize_domain(d: DomainFile) -> str:
    out = ["[domain]", _kv("name", d.name)]
    if d.description:
        out.append(_kv("description", d.description))
    out += ["", "[universe]"]
    out += [str(p) for p in d.universe.propositions]
    objects = d.universe.objects
    if objects:
        out += ["", "[objects]"]
        out += [_kv(k, v) for k, v in objects.items()]
    if d.rules.mutex_groups:
        out += ["", "[mutex]"]
        out += [_fmt(g) for g in d.rules.mutex_groups]
    out += [
        "",
        "[rules]",
        _kv("add_pre_disjoint", str(d.rules.add_pre_disjoint).lower()),
        _kv("del_subset_pre", str(d.rules.del_subset_pre).lower()),
        _kv("explicit_model_space", str(d.explicit_model_space).lower()),
        _kv("fill_prob", repr(float(d.fill_prob))),
    ]
    with _env_access():
        for p in d.policies:
            out += ["", f"[policy {p.id}]"]
            if p.description:
                out.append(_kv("description", p.description))
            out += [
                _kv("pre", _fmt(p.hidden_pre)),
                _kv("add", _fmt(p.hidden_add)),
                _kv("del", _fmt(p.hidden_del)),
                _kv("duration", str(p.duration_ticks)),
                _kv("failure_prob", repr(float(p.failure_prob))),
            ]
            if p.failure_add:
                out.append(_kv("failure_add", _fmt(p.failure_add)))
            if p.failure_del:
                out.append(_kv("failure_del", _fmt(p.failure_del)))
    for m in d.models:
        out += ["", f"[model {m.name}]", _kv("pre", _fmt(m.pre)), _kv("add", _fmt(m.add)), _kv("del", _fmt(m.delete))]
    return "\n".join(out) + "\n"


def parse_taskset(text: str, universe: DomainUniverse, source: str = "<tasks>") -> TaskSetFile:
    sections = _split_sections(text, source)
    name = domain = ""
    tasks = []
    ids: set[str] = set()
    for sec in sections:
        if sec.kind == "taskset":
            e = sec.get("name")
            name = e.value if e else ""
            e = sec.get("domain")
            domain = e.value if e else ""
        elif sec.kind == "task":
            if not sec.name:
                raise ParseError("task section needs an id: [task <id>]", sec.line, 1, source)
            if sec.name in ids:
                raise ParseError(f"duplicate task {sec.name}", sec.line, 1, source)
            ids.add(sec.name)
            if sec.get("g") is None:
                raise ParseError(f"task {sec.name} has no goal 'g'", sec.line, 1, source)
            tasks.append(Task(sec.name, _atoms(universe, sec.get("s0"), source), _atoms(universe, sec.get("g"), source)))
        else:
            raise ParseError(f"unknown section [{sec.kind}]", sec.line, 1, source)
    return TaskSetFile(name, domain, tuple(tasks))


def serialize_taskset(ts: TaskSetFile) -> str:
    out = ["[taskset]", _kv("name", ts.name), _kv("domain", ts.domain)]
    for t in ts.tasks:
        out += ["", f"[task {t.id}]", _kv("s0", _fmt(t.s0)), _kv("g", _fmt(t.g))]
    return "\n".join(out) + "\n"


PathLike = Union[str, Path]


def load_domain(path: PathLike) -> DomainFile:
    path = Path(path)
    return parse_domain(path.read_text(encoding="utf-8"), str(path))


def load_taskset(path: PathLike, domain: Optional[DomainFile] = None) -> tuple[DomainFile, TaskSetFile]:
    """Load a task set and (unless given) the domain it references, relative to the file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if domain is None:
        ref = next((s.get("domain") for s in _split_sections(text, str(path)) if s.kind == "taskset"), None)
        if ref is None or not ref.value:
            raise ParseError("task set does not name its domain", 1, 1, str(path))
        domain = load_domain(path.parent / ref.value)
    return domain, parse_taskset(text, domain.universe, str(path))
