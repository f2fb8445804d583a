import numpy as np
import pytest

from binfit.data import CENSUS_2000_EDGES, BinnedSample, load_two_districts


@pytest.fixture(scope="session")
def districts():
    return {s.id: s for s in load_two_districts()}


@pytest.fixture(scope="session")
def mcnary(districts):
    return districts["McNary"]


@pytest.fixture(scope="session")
def rancho(districts):
    return districts["Rancho Santa Fe"]


def expected_counts_sample(cdf, total=1e5, edges=CENSUS_2000_EDGES, uid="exact"):
    """Bin probabilities times ``total``, rounded to whole counts."""
    e = np.asarray(edges, dtype=float)
    F = np.array([0.0] + [cdf(x) for x in e[1:-1]] + [1.0])
    counts = np.rint(total * np.diff(F)).astype(int)
    return BinnedSample.from_edges(uid, edges, counts)


def rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
