import numpy as np
import pytest
from scipy.special import expit

from mindex import Dataset


def logistic_design(n, beta, seed, x_scale=1.0):
    """x0 and x standard normal, logistic shock; returns (dataset, true index)."""
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    x0 = rng.standard_normal(n)
    x = rng.standard_normal((n, beta.size)) * x_scale
    z = x0 + x @ beta
    y = (rng.uniform(size=n) < expit(z)).astype(float)
    return Dataset(x0, x, y), z


@pytest.fixture
def small_logistic():
    return logistic_design(400, [1.0, -0.5], seed=3)[0]


# acceptance lines collected by test_acceptance and repeated at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
