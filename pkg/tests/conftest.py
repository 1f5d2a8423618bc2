import sys

import numpy as np
import pytest

from slicedot import make_measure


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_uniform_pair(rng, m=None, d=2, max_m=8):
    """Two uniform measures of equal size with Gaussian supports."""
    if m is None:
        m = int(rng.integers(1, max_m + 1))
    return make_measure(rng.standard_normal((d, m))), make_measure(rng.standard_normal((d, m)))


def unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance verdicts collected by ``test_acceptance``."""
    mod = sys.modules.get("test_acceptance")
    rows = getattr(mod, "RESULTS", None)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(rows, key=lambda r: int(r.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
