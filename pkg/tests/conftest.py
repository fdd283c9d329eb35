import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from t2rec.data import ObservationSet

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_observations(rng, n_users=12, n_items=10, n_ratings=60, D_u=3, D_i=4):
    keys = rng.choice(n_users * n_items, n_ratings, replace=False)
    users, items = np.divmod(keys, n_items)
    return ObservationSet(
        users,
        items,
        rng.normal(size=n_ratings),
        rng.uniform(size=(n_users, D_u)),
        rng.uniform(size=(n_items, D_i)),
    )


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
