"""One test per acceptance criterion; each prints a single PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section of the
terminal summary.
"""

import pytest

from proxrate import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module", autouse=True)
def shared_traces():
    acceptance.prefetch(threads=1)


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.CRITERIA[number]()
    line = result.line()
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    assert result.passed, line


@pytest.mark.parametrize("number", [4])
def test_negative_control_is_caught(number):
    """Certificates judged at s = 1.5/L must flag violations."""
    result = acceptance.CRITERIA[number](corrupt=1.5)
    print(result.line())
    assert not result.passed
