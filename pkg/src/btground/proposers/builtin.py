"""Built-in proposers: exhaustive, heuristic, random, oracle and draft.

All of them are pure functions of their input and seed. The oracle reads
hidden policy transitions and exists only as a test and benchmark upper
bound; it trips the ``--redact`` audit by design.
"""

from __future__ import annotations

import logging
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from ..env import ExecutionContext, SimEnvironment, derive_seed
from ..modelspace import Key, ModelSpace, _atom_roles, model_name
from ..symbolic import ActionModel, DomainUniverse, StateSet, iter_bits
from .base import (
    PolicyChoice,
    ProposalInput,
    ProposerSuite,
    RefineInput,
    Refinement,
    SampleInput,
)
from .text import atom_tokens, overlap, split_cues, tokens

log = logging.getLogger(__name__)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _model(u: DomainUniverse, name: str, key: Key) -> ActionModel:
    return ActionModel(name, StateSet(u, key[0]), StateSet(u, key[1]), StateSet(u, key[2]))


def _is_auto_name(name: str) -> bool:
    return name.startswith("m_") or name.startswith("g_")


def _refined_name(h: ActionModel, key: Key) -> str:
    """``PutIn`` becomes ``PutIn'``; generated names are rebuilt from the new triple."""
    if h.name.startswith("m_"):
        return "m_" + "_".join(map(str, key))
    if h.name.startswith("g_"):
        return "g_" + "_".join(map(str, key))
    return h.name + "'"


def _take(candidates: Iterable[ActionModel], inp: ProposalInput, limit: Optional[int] = None) -> list[ActionModel]:
    """First ``limit`` valid, unexplored, distinct candidates."""
    limit = inp.batch if limit is None else limit
    seen = set(inp.explored) | {h.key for h in inp.known}
    out = []
    for h in candidates:
        if len(out) >= limit:
            break
        if h.key in seen or not inp.space.is_valid(h.key):
            continue
        seen.add(h.key)
        out.append(h)
    return out


# -- exhaustive ----------------------------------------------------------------


class ExhaustiveProposer:
    """Unexplored models in canonical order, ``batch`` at a time."""

    def propose(self, inp: ProposalInput) -> list[ActionModel]:
        return _take(inp.space.iter_models(), inp)


class ExhaustiveSampler:
    """Catalog order; the first policy not yet tried for this model."""

    def sample(self, inp: SampleInput) -> PolicyChoice:
        ids = [pid for pid, _ in inp.catalog]
        for pid in ids:
            if pid not in inp.tried:
                return PolicyChoice(pid)
        return PolicyChoice(ids[inp.attempt % len(ids)])


class NullRefiner:
    def refine(self, inp: RefineInput) -> Refinement:
        return Refinement(None)


# -- heuristic -----------------------------------------------------------------


def _partners(space: ModelSpace, target: int) -> int:
    out = 0
    for g in space.rules.mutex_masks():
        if g & target:
            out |= g
    return out & ~target


def _related(u: DomainUniverse, target: int) -> int:
    """Atoms sharing an object with the target, plus all zero-arity atoms."""
    objs = set()
    for i in iter_bits(target):
        objs.update(u.propositions[i].args)
    bits = 0
    for p in u.propositions:
        if not p.args or objs.intersection(p.args):
            bits |= 1 << p.index
    return bits & ~target


def guess_model(space: ModelSpace, target: int, pre: int, name: Optional[str] = None) -> ActionModel:
    """Model adding ``target`` from ``pre``; pre atoms mutex with the target are deleted."""
    u = space.universe
    pre &= ~target
    dele = pre & _partners(space, target)
    key = (pre, target, dele)
    return _model(u, name or "g_" + "_".join(map(str, key)), key)


class HeuristicProposer:
    """Guesses models for atoms that are needed but missing.

    A target is a set of atoms ``T`` with a source state ``s0``. Without
    planning feedback the targets are the goals' missing atoms; with it they
    are the unmet atoms of each frontier condition, plus atoms true in ``s0``
    that clash with the rest of their condition. For each target the
    candidates are, in order: the full guess (pre = atoms of ``s0`` related to
    ``T``), one guess per exclusive alternative of ``T`` outside ``s0`` (pre =
    that alternative), the minimal guess (pre = only what must be deleted),
    then seeded random precondition subsets over related atoms.
    """

    def __init__(self, random_variants: int = 6, explore: int = 4):
        self.random_variants = random_variants
        self.explore = explore

    def _expand(self, d: int, s0: int) -> list[tuple[int, int]]:
        out = []
        if _popcount(d) > 1:
            out.append((d, s0))
        out.extend((1 << i, s0) for i in iter_bits(d))
        return out

    def targets(self, inp: ProposalInput) -> list[tuple[int, int]]:
        by_id = {t.id: t for t in inp.tasks}
        found: list[tuple[int, int]] = []
        if inp.failures is not None and inp.phase == "repair_proposal":
            for ctx in inp.failures:
                task = by_id.get(ctx.task_id)
                if task is None:
                    continue
                for c in ctx.frontier:
                    d = c.bits & ~task.s0.bits
                    if d:
                        found.extend(self._expand(d, task.s0.bits))
                    # atoms true at the start but clashing with the rest of
                    # the condition have to be restored later
                    for i in iter_bits(c.bits & task.s0.bits):
                        if _partners(inp.space, 1 << i) & c.bits:
                            found.append((1 << i, task.s0.bits))
        for t in inp.tasks:
            d = t.g.bits & ~t.s0.bits
            if d:
                found.extend(self._expand(d, t.s0.bits))
        if inp.failures is None and inp.phase == "repair_proposal" and inp.tasks:
            # no diagnostics: explore atoms picked at random
            rng = np.random.default_rng(derive_seed(inp.seed, "explore", inp.round))
            n = inp.universe.n
            for _ in range(self.explore):
                task = inp.tasks[int(rng.integers(len(inp.tasks)))]
                i = int(rng.integers(n))
                if not task.s0.bits >> i & 1:
                    found.append((1 << i, task.s0.bits))
        seen = set()
        out = []
        for t in found:
            if t not in seen:
                seen.add(t)
                out.append(t)
        return out

    def variants(self, space: ModelSpace, target: int, s0: int, seed: int) -> Iterator[ActionModel]:
        u = space.universe
        related = _related(u, target)
        partners = _partners(space, target)
        must = s0 & partners
        yield guess_model(space, target, (related & s0) | must)
        # move out of one exclusive alternative into the target
        for i in iter_bits(partners & ~s0):
            yield guess_model(space, target, 1 << i)
        yield guess_model(space, target, must)
        rng = np.random.default_rng(seed)
        pool = list(iter_bits(related))
        for _ in range(self.random_variants):
            draws = rng.random(len(pool))
            pre = 0
            for i, r in zip(pool, draws):
                if r < 0.5:
                    pre |= 1 << i
            yield guess_model(space, target, pre)

    def propose(self, inp: ProposalInput) -> list[ActionModel]:
        gens = [
            self.variants(inp.space, t, s0, derive_seed(inp.seed, "variants", t, s0, inp.round))
            for t, s0 in self.targets(inp)
        ]

        def round_robin() -> Iterator[ActionModel]:
            live = list(gens)
            while live:
                nxt = []
                for g in live:
                    h = next(g, None)
                    if h is not None:
                        yield h
                        nxt.append(g)
                live = nxt

        return _take(round_robin(), inp)


def _model_tokens(h: ActionModel) -> tuple[set[str], set[str]]:
    main: set[str] = set()
    if not _is_auto_name(h.name):
        main |= tokens(h.name.rstrip("'"))
    for a in h.add.atoms():
        main |= atom_tokens(a)
    side: set[str] = set()
    for a in h.pre.atoms():
        side |= atom_tokens(a)
    return main, side


def policy_score(h: ActionModel, description: str, pid: str, history: Sequence[ExecutionContext] = ()) -> int:
    """Keyword overlap (adds against effect words, preconditions against all
    words) plus a history bonus for observed add effects and a
    penalty for runs that stalled on an unmet precondition."""
    main, side = _model_tokens(h)
    effect, state = split_cues(description)
    effect |= tokens(pid)
    # an add atom named as a state the policy needs is evidence against it
    score = 2 * overlap(main, effect) - 2 * overlap(main, state - effect) + overlap(side, effect | state)
    for r in history:
        if r.policy_id != pid:
            continue
        if r.changed:
            score += 2 * _popcount((r.s_t.bits & ~r.s0.bits) & h.add.bits)
        elif r.note.startswith("precondition unmet"):
            score -= 1
    return score


class HeuristicSampler:
    def sample(self, inp: SampleInput) -> PolicyChoice:
        history = inp.history or ()
        ranked = sorted(
            enumerate(inp.catalog),
            key=lambda item: (-policy_score(inp.model, item[1][1], item[1][0], history), item[0]),
        )
        for _, (pid, _) in ranked:
            if pid not in inp.tried:
                return PolicyChoice(pid)
        return PolicyChoice(ranked[0][1][0])


def _relevance(u: DomainUniverse, i: int, desc: set[str]) -> int:
    return overlap(atom_tokens(str(u.propositions[i])), desc)


class HeuristicRefiner:
    """Rebuilds a model from its execution record.

    Runs are grouped by policy and only policies that produced part of the
    model's add list are considered, best match first. From the runs where
    that policy changed the state the refiner reads off observed adds and
    deletes; atoms deleted every time join the precondition, and inherited
    precondition atoms survive only if the description mentions them. Runs
    where nothing visible happened although the current precondition held are
    explained by a greedy hitting set over atoms common to every firing run,
    ties going to the atom named in the policy's description. Deletes outside
    the precondition ("stale" deletes) are only reported. Without usable
    execution records it falls back to adding the single most
    description-relevant atom to the precondition.
    """

    def refine(self, inp: RefineInput) -> Refinement:
        if not inp.history:
            return self._textual(inp)
        h = inp.model
        groups: dict[str, list[ExecutionContext]] = {}
        for r in inp.history:
            groups.setdefault(r.policy_id, []).append(r)
        order = {pid: k for k, pid in enumerate(groups)}

        def rank(pid: str) -> tuple:
            changed = [r for r in groups[pid] if r.changed]
            obs = 0
            for r in changed:
                obs |= r.s_t.bits & ~r.s0.bits
            return (_popcount(obs & h.add.bits), len(changed), -order[pid])

        ranked = sorted(groups, key=rank, reverse=True)
        notes: list[str] = []
        for pid in ranked:
            # a rectified model must still deliver part of what h promised
            if rank(pid)[0] == 0:
                continue
            model, extra = self._rebuild(inp, pid, groups[pid])
            notes.extend(extra)
            if model is not None:
                return Refinement(model, tuple(notes))
        if not notes:
            return self._textual(inp, note="no policy produced any declared add effect")
        return Refinement(None, tuple(notes))

    def _rebuild(
        self, inp: RefineInput, pid: str, runs: list[ExecutionContext]
    ) -> tuple[Optional[ActionModel], list[str]]:
        h = inp.model
        u = inp.universe
        changed = [r for r in runs if r.changed]
        desc = tokens(dict(inp.catalog).get(pid, "")) | tokens(pid)

        common = u.full_bits
        after = u.full_bits
        obs_add = obs_del = 0
        for r in changed:
            common &= r.s0.bits
            after &= r.s_t.bits
            obs_add |= r.s_t.bits & ~r.s0.bits
            obs_del |= r.s0.bits & ~r.s_t.bits
        refuted_del = 0
        for r in changed:
            refuted_del |= h.delete.bits & r.s0.bits & r.s_t.bits

        inherited = h.pre.bits & common & ~refuted_del
        # inherited atoms the description never mentions must earn their
        # place back through the hitting set below
        for i in iter_bits(inherited):
            if not _relevance(u, i, desc):
                inherited &= ~(1 << i)
        pre = inherited | (obs_del & common)
        # an unchanged run says nothing if firing would have been invisible
        idle = [
            r.s0.bits
            for r in runs
            if not r.changed and (obs_add & ~r.s0.bits or obs_del & r.s0.bits)
        ]
        unexplained = [s for s in idle if not pre & ~s]
        cand = common & ~pre
        while unexplained and cand:
            best_i, best_key = -1, None
            for i in iter_bits(cand):
                hits = sum(1 for s in unexplained if not s >> i & 1)
                key = (hits, _relevance(u, i, desc), -i)
                if best_key is None or key > best_key:
                    best_i, best_key = i, key
            if best_key[0] == 0:
                break
            pre |= 1 << best_i
            cand &= ~(1 << best_i)
            unexplained = [s for s in unexplained if s >> best_i & 1]

        add = obs_add | (h.add.bits & after)
        if inp.space.rules.add_pre_disjoint:
            add &= ~pre
        dele = obs_del & pre
        notes = []
        stale = obs_del & ~pre
        if stale:
            notes.append(
                f"stale delete {u.atom_names(stale)} by policy {pid} lies outside the precondition of {h.name}; not repaired"
            )
        if unexplained:
            notes.append(f"{len(unexplained)} idle run(s) of {pid} left unexplained")
        key = (pre, add, dele)
        if not add or key == h.key:
            return None, notes + [f"no refinement from {pid}: model unchanged"]
        if not inp.space.is_valid(key):
            return None, notes + [f"no refinement from {pid}: rebuilt model is invalid"]
        if key in inp.explored:
            return None, notes + [f"no refinement from {pid}: rebuilt model was already explored"]
        return _model(u, _refined_name(h, key), key), notes

    def _textual(self, inp: RefineInput, note: str = "") -> Refinement:
        h = inp.model
        u = inp.universe
        notes = (note,) if note else ()
        if not inp.catalog:
            return Refinement(None, notes)
        ranked = sorted(
            enumerate(inp.catalog), key=lambda item: (-policy_score(h, item[1][1], item[1][0]), item[0])
        )
        pid, text = ranked[0][1]
        desc = tokens(text) | tokens(pid)
        best_i, best_key = -1, None
        for i in range(u.n):
            bit = 1 << i
            if (h.pre.bits | h.add.bits) & bit:
                continue
            key = (h.pre.bits | bit, h.add.bits, h.delete.bits)
            if not inp.space.is_valid(key) or key in inp.explored:
                continue
            score = (_relevance(u, i, desc), -i)
            if score[0] > 0 and (best_key is None or score > best_key):
                best_i, best_key = i, score
        if best_key is None:
            return Refinement(None, notes + ("no refinement: no description-relevant atom",))
        key = (h.pre.bits | 1 << best_i, h.add.bits, h.delete.bits)
        return Refinement(_model(u, _refined_name(h, key), key), notes)


# -- random --------------------------------------------------------------------


def _random_key(space: ModelSpace, rng: np.random.Generator) -> Key:
    roles = _atom_roles(space.rules)
    picks = rng.integers(len(roles), size=space.universe.n)
    pre = add = dele = 0
    for i, r in enumerate(picks):
        p, a, d = roles[int(r)]
        pre |= p << i
        add |= a << i
        dele |= d << i
    return (pre, add, dele)


class RandomProposer:
    """Uniformly random valid models; the no-knowledge baseline."""

    def __init__(self, tries_per_model: int = 50):
        self.tries = tries_per_model

    def propose(self, inp: ProposalInput) -> list[ActionModel]:
        rng = np.random.default_rng(derive_seed(inp.seed, "random-propose", inp.phase, inp.round))
        u = inp.universe

        def gen() -> Iterator[ActionModel]:
            for _ in range(inp.batch * self.tries):
                key = _random_key(inp.space, rng)
                yield _model(u, model_name(u, key), key)

        return _take(gen(), inp)


class RandomSampler:
    def sample(self, inp: SampleInput) -> PolicyChoice:
        rng = np.random.default_rng(derive_seed(inp.seed, "random-sample", inp.model.key, inp.attempt))
        ids = [pid for pid, _ in inp.catalog]
        fresh = [pid for pid in ids if pid not in inp.tried] or ids
        return PolicyChoice(fresh[int(rng.integers(len(fresh)))])


class RandomRefiner:
    """Moves one random atom to a random role."""

    def refine(self, inp: RefineInput) -> Refinement:
        rng = np.random.default_rng(derive_seed(inp.seed, "random-refine", inp.model.key))
        roles = _atom_roles(inp.space.rules)
        pre, add, dele = inp.model.key
        for _ in range(50):
            i = int(rng.integers(inp.universe.n))
            p, a, d = roles[int(rng.integers(len(roles)))]
            m = ~(1 << i)
            key = ((pre & m) | p << i, (add & m) | a << i, (dele & m) | d << i)
            if key != inp.model.key and inp.space.is_valid(key) and key not in inp.explored:
                return Refinement(_model(inp.universe, _refined_name(inp.model, key), key))
        return Refinement(None)


# -- oracle and drafts ---------------------------------------------------------


class OracleProposer:
    """Proposes the hidden transition of every policy. Test and benchmark use only."""

    def __init__(self, env: SimEnvironment):
        self.env = env

    def models(self, space: ModelSpace) -> list[ActionModel]:
        out = []
        for p in self.env.policies.values():
            key = (p.hidden_pre.bits, p.hidden_add.bits, p.hidden_del.bits)
            out.append(_model(space.universe, p.id, key))
        return out

    def propose(self, inp: ProposalInput) -> list[ActionModel]:
        return _take(self.models(inp.space), inp)


class OracleSampler:
    """The policy whose hidden transition realises the model, if any."""

    def __init__(self, env: SimEnvironment):
        self.env = env
        self.fallback = HeuristicSampler()

    def sample(self, inp: SampleInput) -> PolicyChoice:
        h = inp.model
        for pid, _ in inp.catalog:
            p = self.env.policy(pid)
            if (
                p.hidden_pre.bits & ~h.pre.bits == 0
                and p.hidden_add.bits == h.add.bits
                and p.hidden_del.bits == h.delete.bits
                and pid not in inp.tried
            ):
                return PolicyChoice(pid)
        return self.fallback.sample(inp)


class DraftProposer:
    """Starts from hand-written draft models, then defers to another proposer."""

    def __init__(self, drafts: Sequence[ActionModel], fallback=None):
        self.drafts = tuple(drafts)
        self.fallback = fallback if fallback is not None else HeuristicProposer()

    def propose(self, inp: ProposalInput) -> list[ActionModel]:
        if inp.phase == "initial_proposal":
            return _take(self.drafts, inp, limit=max(inp.batch, len(self.drafts)))
        return self.fallback.propose(inp)


BUILTIN = ("exhaustive", "heuristic", "random", "oracle", "draft")


def make_suite(
    name: str,
    env: Optional[SimEnvironment] = None,
    drafts: Sequence[ActionModel] = (),
    timeout: float = 120.0,
) -> ProposerSuite:
    """Suite by CLI name: one of :data:`BUILTIN` or ``external:cmd=...`` / ``external:url=...``."""
    if name == "exhaustive":
        return ProposerSuite(ExhaustiveProposer(), ExhaustiveSampler(), NullRefiner(), name)
    if name == "heuristic":
        return ProposerSuite(HeuristicProposer(), HeuristicSampler(), HeuristicRefiner(), name)
    if name == "random":
        return ProposerSuite(RandomProposer(), RandomSampler(), RandomRefiner(), name)
    if name == "oracle":
        if env is None:
            raise ValueError("the oracle proposer needs the environment")
        return ProposerSuite(OracleProposer(env), OracleSampler(env), HeuristicRefiner(), name)
    if name == "draft":
        return ProposerSuite(DraftProposer(drafts), HeuristicSampler(), HeuristicRefiner(), name)
    if name.startswith("external:"):
        from .external import ExternalProposer

        ext = ExternalProposer.from_spec(name[len("external:") :], timeout=timeout)
        return ProposerSuite(ext, ext, ext, name)
    raise ValueError(f"unknown proposer {name!r}; expected one of {', '.join(BUILTIN)} or external:<spec>")
