import numpy as np
import pytest

from prescience.data import Dataset


def make_dataset(n=30, p=3, k=1, seed=0, noise=0.5, binary_x0=False):
    """Small synthetic binary-choice sample with an intercept as the only extra focus column."""
    rng = np.random.default_rng(seed)
    x0 = rng.integers(0, 2, n).astype(float) if binary_x0 else rng.standard_normal(n)
    z = rng.standard_normal((n, p))
    u = x0 + (z[:, 0] if p else 0.0) - 0.3 + noise * rng.standard_normal(n)
    y = (u >= 0).astype(float)
    names = ("x0", *(["intercept"] if k else []), *[f"z{j + 1}" for j in range(p)])
    return Dataset(y, x0, np.ones((n, k)), z, names, intercept={"intercept"} if k else set())


@pytest.fixture
def small():
    return make_dataset()


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
