"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints a single PASS/FAIL line followed by its sub-checks; the
lines are also collected into the terminal summary.  Run directly with
``python tests/test_acceptance.py`` for the table alone.
"""

import sys

import pytest

from kpzlab import verify

RESULTS = {}


@pytest.mark.parametrize("number", sorted(verify.CRITERIA))
def test_criterion(number):
    res = verify.CRITERIA[number]()
    RESULTS[number] = res
    print(res.summary())
    for check in res.checks:
        print(check.line())
    assert res.passed, "\n".join([res.summary()] + [c.line() for c in res.checks if not c.passed])


if __name__ == "__main__":
    failed = 0
    for res in verify.run():
        print(res.summary(), flush=True)
        for check in res.checks:
            print(check.line(), flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
