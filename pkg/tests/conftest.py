import os
import sys

import pytest
from hypothesis import settings

from rcatail.model import RcaModel

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

SIGMA_FOUR = 3 ** -0.25
SIGMA_SIX = 15 ** (-1 / 6)


@pytest.fixture
def forced4():
    return RcaModel((0.0,), (SIGMA_FOUR,))


@pytest.fixture
def ref_q1():
    return RcaModel((0.3,), (0.6,))


@pytest.fixture
def ref_q2():
    return RcaModel((0.2, 0.1), (0.3, 0.1))


ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one pass/fail line per acceptance criterion; printed in the summary."""
    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert passed, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
