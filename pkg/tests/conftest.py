import numpy as np
import pytest

from etacr import SystemSpec

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one ``criterion n: PASS|FAIL`` line; printed at the end of the run."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash[_ACCEPTANCE]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_spec():
    return SystemSpec(A=1.25, B=1.0, sigma=1.0, x0=-2.0, eta=1.0, T=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
