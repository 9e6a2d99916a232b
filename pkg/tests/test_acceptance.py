"""Acceptance criteria 1-10: one PASS/FAIL line per criterion.

The lines are printed as each check finishes and repeated in the terminal
summary.  Run directly (``python tests/test_acceptance.py``) to print them
without pytest.
"""

import pytest

from spothopf import validation

LINES = []


@pytest.mark.parametrize("check", validation.ALL_CHECKS, ids=lambda f: f.__name__[len("check_"):])
def test_criterion(check):
    result = check()
    LINES.append(result.line())
    print(result.line())
    assert result.passed, result.detail


if __name__ == "__main__":
    for r in validation.run_all():
        print(r.line(), flush=True)
