import numpy as np
import pytest

from sa_lab.realization import FullLaplacian, PinnedLaplacian


@pytest.fixture(scope="session")
def pinned():
    return PinnedLaplacian()


@pytest.fixture(scope="session")
def full():
    return FullLaplacian()


@pytest.fixture(scope="session")
def pinned_eig(pinned):
    """Friedrichs eigen-system of the pinned model, 2e4 terms."""
    return pinned.eigen_system(pinned.friedrichs(), 20000)


@pytest.fixture(scope="session")
def full_eig(full):
    return full.eigen_system(full.friedrichs(), 20000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
