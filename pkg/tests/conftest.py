import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def brute_force_keys(instance):
    """Every key tuple consistent with all pairs, by direct table composition."""
    fwd = instance.family.forward
    n = instance.n_keys
    tuples = np.array(list(itertools.product(range(n), repeat=instance.depth)), dtype=np.int64)
    ok = np.ones(len(tuples), dtype=bool)
    for p, c in instance.pairs:
        x = np.full(len(tuples), p, dtype=np.int64)
        for level in range(instance.depth):
            x = fwd[tuples[:, level], x]
        ok &= x == c
    return [tuple(int(k) for k in t) for t in tuples[ok]]


@pytest.fixture
def oracle():
    return brute_force_keys


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
