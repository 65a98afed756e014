"""Command-line entry point: ``btground ground|plan|run|metrics|enumerate``.

Exit codes: 0 success, 1 incomplete grounding or a failed task, 2 bad input
(unreadable or malformed files, unknown names, redaction violations), 3 a
resource budget was exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

from .domains import bundled_path
from .env import redact_hidden
from .errors import BTGroundError, HiddenFieldAccess, ParseError, ResourceError
from .grounding import GroundingConfig, compute_metrics, task_attributes
from .harness import format_attributes, format_table, ground_file, mean_attributes
from .io.bttext import render_bt, render_dot
from .io.domain import DomainFile, TaskSetFile, load_domain, load_taskset
from .io.results import ResultsFile, load_results, serialize_results
from .modelspace import ModelSpace
from .planner import PlannerConfig, bt_expansion, default_tick_budget
from .proposers import BUILTIN
from .symbolic import DomainUniverse, ValidityRules
from .system import BTSystem, GroundedAction

log = logging.getLogger("btground")

EXIT_OK, EXIT_INCOMPLETE, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _resolve_tasks(spec: str) -> Path:
    p = Path(spec)
    if p.is_file():
        return p
    try:
        return bundled_path(spec)
    except FileNotFoundError:
        raise InputError(f"{spec}: no such task file or bundled task set") from None


def _load(spec: str) -> tuple[DomainFile, TaskSetFile]:
    return load_taskset(_resolve_tasks(spec))


def _select(taskset: TaskSetFile, ids: Optional[Sequence[str]]):
    if not ids:
        return taskset.tasks
    by_id = {t.id: t for t in taskset.tasks}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise InputError(f"unknown task id(s): {', '.join(missing)}")
    return tuple(by_id[i] for i in ids)


def _system(args, domain: DomainFile) -> BTSystem:
    """Actions from a results file, or the domain's declared models bound by name."""
    if args.results:
        rf = load_results(args.results)
        if rf.universe.propositions != domain.universe.propositions:
            raise InputError(f"{args.results} was produced for a different universe")
        if not 0 <= args.run < len(rf.runs):
            raise InputError(f"{args.results} has {len(rf.runs)} run(s); --run {args.run} is out of range")
        # re-home the models on the domain's universe object
        actions = []
        for a in rf.runs[args.run].system.actions:
            m = a.model
            rehome = domain.universe.from_bits
            actions.append(
                GroundedAction(
                    type(m)(m.name, rehome(m.pre.bits), rehome(m.add.bits), rehome(m.delete.bits)),
                    a.policy,
                    a.seed,
                )
            )
        return BTSystem.from_actions(domain.universe, actions)
    ids = {p.id for p in domain.policies}
    actions = [GroundedAction(m, m.name) for m in domain.models if m.name in ids]
    if not actions:
        raise InputError("no --results given and the domain declares no models named after its policies")
    return BTSystem.from_actions(domain.universe, actions)


# -- subcommands -----------------------------------------------------------------


def cmd_ground(args) -> int:
    domain, taskset = _load(args.tasks)
    if args.algo == "naive" and args.proposer != "heuristic":
        log.warning("--proposer is ignored by the naive algorithm")
    cfg = GroundingConfig(
        seed=args.seed,
        k_trials=args.k_trials,
        nmax=args.nmax,
        max_cycles=args.max_cycles,
        batch=args.batch,
        strict=args.strict,
        ablate_planning_contexts=args.ablate_planning_contexts,
        ablate_execution_contexts=args.ablate_execution_contexts,
    )
    audit = redact_hidden() if args.redact else contextlib.nullcontext()
    with audit:
        rf = ground_file(domain, taskset, args.algo, args.proposer, cfg, args.runs)
    text = serialize_results(rf, timing=not args.omit_timing)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    m = compute_metrics(rf.runs, taskset.tasks)
    for r in rf.runs:
        print(
            f"seed {r.seed}: complete={str(r.complete).lower()} solved={len(r.solved_tasks)}/{len(taskset.tasks)} "
            f"actions={len(r.system.actions)} fc={r.feedback_cycles}"
        )
    print(f"{taskset.name}: ASR={100 * m.asr:.1f} CSR={100 * m.csr:.1f} FC={m.fc:.1f} over {m.runs} run(s)")
    return EXIT_OK if all(r.complete for r in rf.runs) else EXIT_INCOMPLETE


def cmd_plan(args) -> int:
    domain, taskset = _load(args.tasks)
    system = _system(args, domain)
    status = EXIT_OK
    for t in _select(taskset, args.task):
        res = bt_expansion(t, system.models, PlannerConfig(args.max_expansions))
        print(f"# task {t.id}: {'solved' if res.solved else 'unsolved'}")
        if res.solved:
            print(render_dot(res.solution, t.id) if args.dot else render_bt(res.solution))
        else:
            status = EXIT_INCOMPLETE
            ctx = res.context
            print(render_bt(ctx.sketch))
            for c in ctx.frontier:
                print(f"# unmet: {', '.join(c.atoms()) or '(none)'}")
    return status


def cmd_run(args) -> int:
    domain, taskset = _load(args.tasks)
    system = _system(args, domain)
    env = domain.environment()
    bindings = system.bindings()
    status = EXIT_OK
    for i, t in enumerate(_select(taskset, args.task)):
        res = bt_expansion(t, system.models, PlannerConfig(args.max_expansions))
        if not res.solved:
            print(f"# task {t.id}: no plan")
            status = EXIT_INCOMPLETE
            continue
        budget = args.tick_budget or default_tick_budget(res.solution)
        trace = env.execute_bt(res.solution, t.s0, bindings, budget, seed=args.seed + i)
        print(f"# task {t.id}")
        for st in trace.steps:
            act = f" {st.action} -> {st.policy}" if st.action else ""
            print(f"{st.tick:3d} {st.status}{act} | {', '.join(st.state.atoms())}")
        reached = t.g <= trace.final_state
        ok = trace.succeeded and reached
        print(f"# {t.id}: {'success' if ok else 'failure'} after {trace.executions} execution(s)")
        if not ok:
            status = EXIT_INCOMPLETE
    return status


def _group_key(rf: ResultsFile) -> tuple:
    c = rf.config
    return (rf.taskset, rf.algorithm, rf.proposer, bool(c.get("strict")), bool(c.get("ablate_execution_contexts")))


def cmd_metrics(args) -> int:
    groups: dict[tuple, dict[bool, list]] = defaultdict(lambda: {True: [], False: []})
    tasks: dict[tuple, tuple] = {}
    for path in args.results:
        rf = load_results(path)
        key = _group_key(rf)
        groups[key][bool(rf.config.get("ablate_planning_contexts"))].extend(rf.runs)
        tasks.setdefault(key, rf.tasks)
    rows = []
    for key in sorted(groups):
        without, with_ = groups[key][True], groups[key][False]
        label = key[0] if len({k[0] for k in groups}) == len(groups) else "/".join(map(str, key[:3]))
        if without and with_:
            rows.append((label, compute_metrics(without, tasks[key]), compute_metrics(with_, tasks[key])))
        else:
            rows.append((label, compute_metrics(without or with_, tasks[key]), None))
    print(format_table(rows))
    if args.attributes:
        print()
        attr_rows = []
        for key in sorted(groups):
            runs = groups[key][False] or groups[key][True]
            attrs = [task_attributes(tasks[key], r.results, r.system.models) for r in runs]
            attr_rows.append((key[0], mean_attributes(attrs)))
        print(format_attributes(attr_rows))
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.n is not None:
        if args.n < 1:
            raise InputError("--n must be at least 1")
        universe = DomainUniverse([f"P{i}" for i in range(1, args.n + 1)])
        mutex: tuple = ()
        models: tuple = ()
        explicit = False
    elif args.tasks:
        spec = Path(args.tasks)
        domain = load_domain(spec) if spec.suffix == ".domain" else _load(args.tasks)[0]
        universe, mutex = domain.universe, domain.rules.mutex_groups
        models, explicit = domain.models, domain.explicit_model_space
    else:
        raise InputError("give a task/domain file or --n")
    rules = ValidityRules(
        add_pre_disjoint=not args.no_add_pre_disjoint,
        del_subset_pre=not args.no_del_subset_pre,
        mutex_groups=() if args.no_mutex else mutex,
    )
    space = ModelSpace(universe, rules, models if explicit else None)
    print(space.size())
    if args.list:
        for i, h in enumerate(space.iter_models()):
            if args.limit is not None and i >= args.limit:
                print(f"... ({space.size() - args.limit} more)")
                break
            print(h)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btground", description="Ground behavior-tree action models against policies.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("ground", help="build a BT system for a task set")
    g.add_argument("tasks", help="task file, or the name of a bundled task set")
    g.add_argument("--algo", choices=("naive", "cabto"), default="cabto")
    g.add_argument(
        "--proposer", default="heuristic", help=f"one of {', '.join(BUILTIN)}, or external:cmd=<path> / external:url=<url>"
    )
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--runs", type=int, default=1, help="independent runs with seeds seed, seed+1, ...")
    g.add_argument("--nmax", type=int, default=3, help="policy samples per model and cycle")
    g.add_argument("--k-trials", type=int, default=4, help="scenarios per consistency check")
    g.add_argument("--max-cycles", type=int, default=3, help="feedback cycle budget")
    g.add_argument("--batch", type=int, default=8, help="models per proposal request")
    g.add_argument("--strict", action="store_true", help="exact-transition consistency check")
    g.add_argument("--ablate-planning-contexts", action="store_true")
    g.add_argument("--ablate-execution-contexts", action="store_true")
    g.add_argument("--redact", action="store_true", help="fail if grounding reads hidden policy transitions")
    g.add_argument("--omit-timing", action="store_true", help="leave wall-clock fields out of the results file")
    g.add_argument("-o", "--output", help="results file to write")
    g.set_defaults(func=cmd_ground)

    for name, func, helptext in (
        ("plan", cmd_plan, "plan each task with a grounded system and print the BT"),
        ("run", cmd_run, "plan, then execute each BT in the simulator and print the trace"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("tasks", help="task file, or the name of a bundled task set")
        s.add_argument("-r", "--results", help="results file from `ground` (default: the domain's declared models)")
        s.add_argument("--run", type=int, default=0, help="which run of the results file to use")
        s.add_argument("--task", action="append", help="task id (repeatable; default all)")
        s.add_argument("--max-expansions", type=int, default=None)
        if name == "plan":
            s.add_argument("--dot", action="store_true", help="print a graph description instead of text")
        else:
            s.add_argument("--seed", type=int, default=0)
            s.add_argument("--tick-budget", type=int, default=None)
        s.set_defaults(func=func)

    m = sub.add_parser("metrics", help="aggregate results files into an ASR/CSR/FC table")
    m.add_argument("results", nargs="+")
    m.add_argument("--attributes", action="store_true", help="also print Acts/Conds/Steps averages")
    m.set_defaults(func=cmd_metrics)

    e = sub.add_parser("enumerate", help="count (or list) the valid model space")
    e.add_argument("tasks", nargs="?", help="task or domain file, or a bundled task set name")
    e.add_argument("--n", type=int, help="use a synthetic universe of N atoms instead")
    e.add_argument("--no-add-pre-disjoint", action="store_true")
    e.add_argument("--no-del-subset-pre", action="store_true")
    e.add_argument("--no-mutex", action="store_true")
    e.add_argument("--list", action="store_true")
    e.add_argument("--limit", type=int, default=None)
    e.set_defaults(func=cmd_enumerate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ResourceError as err:
        print(f"btground: resource limit: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except HiddenFieldAccess as err:
        print(f"btground: redaction violated: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ParseError, BTGroundError, ValueError, OSError) as err:
        print(f"btground: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
