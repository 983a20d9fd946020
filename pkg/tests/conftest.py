import numpy as np
import pytest

from dp_screen.domain import Dataset, L1Constraint


def random_dataset(rng, n, d, lam=1.0):
    """Rows with ||x||_inf <= 1 and |y| <= lam."""
    x = rng.uniform(-1, 1, size=(n, d))
    y = rng.uniform(-lam, lam, size=n)
    return Dataset(x, y)


def random_feasible(rng, d, lam):
    w = rng.uniform(-1, 1, size=d)
    return w * (lam * rng.uniform() / np.abs(w).sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    data = random_dataset(rng, 40, 8, lam=2.0)
    return data, L1Constraint(2.0)


#: (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def _order(row):
    key = str(row[0])
    return int(key.split("-")[0]), key


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key, passed, detail in sorted(ACCEPTANCE, key=_order):
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
