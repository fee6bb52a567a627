import numpy as np
import pytest

from besovreg import WaveletSystem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["db2", "db4", "db8", "meyer"])
def family(request):
    return request.param


def random_field(system, rng, scale=1.0):
    from besovreg import CoeffField

    return CoeffField(scale * rng.standard_normal(system.signal_length), system)


def small_system(family="db4", levels=6):
    return WaveletSystem(family, levels)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""

    def report(number, name, passed, detail=""):
        line = f"criterion {number:>2}  {'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
