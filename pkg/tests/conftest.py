import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("weylforge", max_examples=40, deadline=None)
settings.load_profile("weylforge")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, passed, detail, seconds)."""
    def emit(number, passed, detail, seconds):
        line = "criterion %2d  %s  %s  [%.2f s]" % (number, "PASS" if passed else "FAIL", detail, seconds)
        _CRITERIA[number] = line
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
