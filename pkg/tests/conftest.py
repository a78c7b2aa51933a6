import sys

import pytest

from kpzlab.fredholm import build_discretization


@pytest.fixture(scope="session")
def disc_t1():
    return build_discretization(1.0)


@pytest.fixture(scope="session")
def disc_small():
    return build_discretization(1.0, node_count=100)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        terminalreporter.write_line(results[k].summary())
