"""Render proposer requests into text prompts for language-model adapters.

Templates live next to this module as ``prompts/<phase>.txt`` and use
:class:`string.Template` placeholders: ``$universe``, ``$catalog``,
``$tasks``, ``$known_models``, ``$failures``, ``$model``, ``$tried``,
``$executions``, ``$batch`` and ``$phase``. Withheld contexts render as
``(not provided)``.
"""

from __future__ import annotations

import json
from importlib import resources
from string import Template
from typing import Any, Mapping

from .base import ProposerRequest

_MISSING = "(not provided)"


def load_template(phase: str) -> Template:
    text = resources.files(__package__).joinpath("prompts", f"{phase}.txt").read_text(encoding="utf-8")
    return Template(text)


def load_schema(kind: str) -> dict:
    text = resources.files(__package__).joinpath("schemas", f"{kind}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _atoms(xs: list) -> str:
    return "{" + ", ".join(xs) + "}"


def _model(m: Mapping[str, Any]) -> str:
    return f"{m['name']}: pre={_atoms(m['pre'])} add={_atoms(m['add'])} del={_atoms(m['del'])}"


def _universe(u: Mapping[str, Any]) -> str:
    lines = ["  " + " ".join(u["atoms"])]
    for name, desc in u.get("objects", {}).items():
        lines.append(f"  {name}: {desc}")
    for g in u.get("mutex_groups", []):
        lines.append("  mutually exclusive: " + _atoms(g))
    return "\n".join(lines)


def _failure(f: Mapping[str, Any]) -> str:
    sketch = "\n".join("    " + line for line in f["sketch"].splitlines())
    frontier = ", ".join(_atoms(c) for c in f["frontier"]) or "none"
    return (
        f"  task {f['task']}: {f['expanded_condition_count']} condition(s) expanded; "
        f"unmet: {frontier}\n{sketch}"
    )


def _execution(e: Mapping[str, Any]) -> str:
    verdict = "consistent" if e["succeeded"] else "inconsistent"
    note = f" ({e['note']})" if e.get("note") else ""
    return (
        f"  [{e['attempt']}] {e['policy']}: {_atoms(e['s0'])} -> {_atoms(e['s_t'])}; "
        f"+{_atoms(e['added'])} -{_atoms(e['deleted'])}; {verdict}{note}"
    )


def render_prompt(request: ProposerRequest) -> str:
    p = request.payload
    fields = {
        "phase": request.phase,
        "batch": str(p.get("batch", "")),
        "universe": _universe(p["universe"]) if "universe" in p else _MISSING,
        "catalog": "\n".join(f"  {c['id']}: {c['description']}" for c in p.get("catalog", [])) or "  (empty)",
        "tasks": "\n".join(f"  {t['id']}: {_atoms(t['s0'])} -> {_atoms(t['g'])}" for t in p.get("tasks", []))
        or "  (none)",
        "known_models": "\n".join("  " + _model(m) for m in p.get("known_models", [])) or "  (none)",
        "failures": "\n".join(_failure(f) for f in p["failures"]) if "failures" in p else _MISSING,
        "model": "  " + _model(p["model"]) if "model" in p else _MISSING,
        "tried": ", ".join(p.get("tried", [])) or "none",
        "executions": "\n".join(_execution(e) for e in p["executions"]) if "executions" in p else _MISSING,
    }
    return load_template(request.phase).substitute(fields)
