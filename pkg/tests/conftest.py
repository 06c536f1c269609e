import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from esprofile.tabular import from_columns

settings.register_profile(
    "default",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def numeric_table(n=50, m=4, seed=0, balance=0.5, target="y"):
    """Random numeric table with ``m`` features and a boolean target."""
    rng = np.random.default_rng(seed)
    cols = {f"x{j}": np.round(rng.normal(size=n), 6) for j in range(m)}
    y = np.zeros(n, dtype=bool)
    y[: int(round(balance * n))] = True
    cols[target] = rng.permutation(y)
    return from_columns(cols, target)


@pytest.fixture
def table50():
    return numeric_table(50, 4, seed=3)


@pytest.fixture
def mixed():
    rng = np.random.default_rng(11)
    n = 60
    return from_columns(
        {
            "age": np.round(rng.normal(40, 10, n), 2),
            "income": np.round(rng.gamma(2, 1000, n), 2),
            "city": rng.choice(["Bari", "Milano", "Roma"], n),
            "member": rng.random(n) < 0.4,
            "y": np.r_[np.ones(20, bool), np.zeros(40, bool)],
        },
        "y",
    )


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
