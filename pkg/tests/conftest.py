import numpy as np
import pytest

from ssrlrcm import _backend

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _backend.get(request.param))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_partitions(rng, n, r, kmax):
    from ssrlrcm.ensemble import Partition

    parts = []
    for _ in range(r):
        K = int(rng.integers(1, min(kmax, n) + 1))
        # every cluster nonempty: seed one point per cluster, fill the rest at random
        labels = np.concatenate([np.arange(K), rng.integers(0, K, size=n - K)])
        parts.append(Partition(rng.permutation(labels), K))
    return parts


def random_weights(rng, r):
    w = rng.random(r) + 0.05
    return w / w.sum()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
