import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_pair():
    """One planted pair, encoded, shared by the slower module tests."""
    from simglyph.experiment import encode_split, split_pair
    from simglyph.synthdata import random_pair_spec

    spec = random_pair_spec(3, samples_per_class=40)
    split = split_pair(spec, 25)
    return spec, split, encode_split(split, seed=3)


_CRITERIA = []


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance line; the lines are echoed in the terminal summary."""

    def record(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
