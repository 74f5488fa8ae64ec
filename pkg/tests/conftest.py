import numpy as np
import pytest

from spheremcmc.gaussian import CovarianceModel

# covariance of the three-dimensional non-invariance example
COUNTER_C = np.array(
    [
        [1.25, 0.33, -1.62],
        [0.33, 0.42, -0.09],
        [-1.62, -0.09, 2.85],
    ]
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def counter_cov():
    return CovarianceModel.dense(COUNTER_C)


@pytest.fixture(scope="session")
def kl():
    from spheremcmc.levelset import compute_kl

    return compute_kl()


@pytest.fixture(scope="session")
def problem3(kl):
    from spheremcmc.levelset import build_problem

    return build_problem(3, kl=kl)


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; returns the verdict."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
