import math

import numpy as np
import pytest

from thornwalk.profiles import ThornProfile
from thornwalk.sampler import SimConfig


@pytest.fixture
def cone():
    return ThornProfile.power(0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def cfg(n=2000, seed=11, **kw):
    return SimConfig(seed=seed, n_paths=n, **kw)


def within(est, target, k=3.0):
    """|est - target| <= k stderr (with a floor for zero-variance estimates)."""
    return abs(est.mean - target) <= k * max(est.stderr, 1e-12) + 1e-12


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


TAU = 2 * math.pi


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
