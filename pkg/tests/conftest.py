import numpy as np
import pytest

from fixhead import _backend

BACKENDS = sorted(_backend.BACKENDS)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def triple_loop_gemv(m, x):
    out = []
    for i in range(m.shape[0]):
        acc = 0.0
        for j in range(m.shape[1]):
            acc += float(m[i, j]) * float(x[j])
        out.append(acc)
    return np.array(out)


def triple_loop_gemv_t(m, g):
    out = []
    for j in range(m.shape[1]):
        acc = 0.0
        for i in range(m.shape[0]):
            acc += float(m[i, j]) * float(g[i])
        out.append(acc)
    return np.array(out)


_ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
