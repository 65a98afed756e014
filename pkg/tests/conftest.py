import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from btground.domains import load_bundled
from btground.planner import Task
from btground.symbolic import ActionModel, DomainUniverse, StateSet

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ADAPTER = Path(__file__).parent / "adapters" / "echo_adapter.py"


@pytest.fixture(scope="session")
def drawer():
    return load_bundled("drawer")


@pytest.fixture(scope="session")
def lamp():
    return load_bundled("lamp")


@pytest.fixture
def pq():
    """Two-atom universe used by the small hand-written examples."""
    return DomainUniverse(["p", "q"])


def random_instance(rng: np.random.Generator, n: int, n_models: int, p_pre=0.25, p_add=0.2, p_del=0.2):
    """Random STRIPS instance over ``p0..p{n-1}`` with add and del disjoint."""
    u = DomainUniverse([f"p{i}" for i in range(n)])
    full = (1 << n) - 1

    def mask(p):
        return sum(1 << i for i in range(n) if rng.random() < p)

    models = []
    for k in range(n_models):
        add = mask(p_add) or 1 << int(rng.integers(n))
        dele = mask(p_del) & ~add
        models.append(ActionModel(f"a{k}", StateSet(u, mask(p_pre)), StateSet(u, add), StateSet(u, dele)))
    s0 = StateSet(u, mask(0.4))
    g = StateSet(u, mask(0.3) & full)
    return u, models, Task("t", s0, g)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
