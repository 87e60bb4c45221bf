import numpy as np
import pytest

from kwc.potential import quadratic, quartic, weight_quadratic

CRITERIA = {}


@pytest.fixture
def pot():
    return quadratic()


@pytest.fixture
def pot4():
    return quartic()


@pytest.fixture
def wq():
    return weight_quadratic()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record ``(number, passed, detail)`` for the acceptance summary."""

    def record(num, passed, detail):
        CRITERIA[num] = (bool(passed), detail)
        print(f"criterion {num}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        ok, detail = CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
