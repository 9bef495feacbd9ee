import numpy as np
import pytest

from abcerr.models import DiscreteOracleModel, toy_model


@pytest.fixture
def toy():
    return toy_model()


@pytest.fixture
def discrete():
    return DiscreteOracleModel.default()


def tv_distance(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def empirical_pmf(values, support):
    values = np.asarray(values).ravel()
    return np.array([(values == s).mean() for s in support])


def weighted_ks(x1, w1, x2, w2):
    """Sup distance between two weighted empirical CDFs."""
    x1, x2 = np.asarray(x1).ravel(), np.asarray(x2).ravel()
    w1, w2 = np.asarray(w1, float) / np.sum(w1), np.asarray(w2, float) / np.sum(w2)
    grid = np.union1d(x1, x2)
    o1, o2 = np.argsort(x1), np.argsort(x2)
    c1 = np.concatenate([[0], np.cumsum(w1[o1])])[np.searchsorted(x1[o1], grid, side="right")]
    c2 = np.concatenate([[0], np.cumsum(w2[o2])])[np.searchsorted(x2[o2], grid, side="right")]
    return float(np.max(np.abs(c1 - c2)))


_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""

    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
