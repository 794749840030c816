import sys

import numpy as np
import pytest
from hypothesis import settings

from fpklift.testfn import enumerate_family

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fam():
    return enumerate_family(1, 4, 2.0, max_size=32)


@pytest.fixture(scope="session")
def fam2():
    return enumerate_family(2, 2, 2.0, max_size=16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
