import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from kreinspec.problem import shipped_problem  # noqa: E402

settings.register_profile("kreinspec", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kreinspec")


@pytest.fixture(scope="session")
def p0():
    return shipped_problem("example_p0")


@pytest.fixture(scope="session")
def p1():
    return shipped_problem("example_p1")


@pytest.fixture(scope="session")
def p2():
    return shipped_problem("example_p2")


@pytest.fixture(scope="session")
def p0_amended():
    return shipped_problem("example_p0_amended")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one line per acceptance criterion; returns the pass flag."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
