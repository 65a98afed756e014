"""Bundled domains and refinement fixtures.

Each task set ``<name>.tasks`` names its domain file. Fixtures live under
``fixtures/`` and carry draft ``[model]`` sections with one injected defect
each.
"""

from __future__ import annotations

from pathlib import Path

from ..io.domain import DomainFile, TaskSetFile, load_taskset

ROOT = Path(__file__).resolve().parent
FIXTURES = ROOT / "fixtures"

# the seven multi-task sets used for the ablation comparison
ABLATION_SETS = ("cover", "blocks", "pour", "handover", "storage", "tidy", "cook")


def bundled_names() -> list[str]:
    return sorted(p.stem for p in ROOT.glob("*.tasks"))


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURES.glob("*.tasks"))


def bundled_path(name: str) -> Path:
    for base in (ROOT, FIXTURES):
        p = base / f"{name}.tasks"
        if p.is_file():
            return p
    raise FileNotFoundError(f"no bundled task set named {name!r}")


def load_bundled(name: str) -> tuple[DomainFile, TaskSetFile]:
    return load_taskset(bundled_path(name))
