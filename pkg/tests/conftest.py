import numpy as np
import pytest

from rrlab import _backend

ACCEPTANCE_LINES = []

BACKENDS = sorted(_backend.BACKENDS)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_state(rng, D, order=5, scale=0.5):
    """Random kinematic derivatives satisfying the orthogonality chain."""
    from rrlab import minkowski as mk
    from rrlab.motion import project_derivs
    v = rng.normal(size=D - 1) * scale
    u = np.concatenate([[np.sqrt(1.0 + v @ v)], v])
    d = [rng.normal(size=D), u]
    for _ in range(2, order + 1):
        d.append(rng.normal(size=D) * scale)
    # project with a generous limit: the raw draws are far off the manifold
    d = project_derivs(d, limit=np.inf)
    assert abs(mk.dot(d[1], d[1]) + 1.0) < 1e-12
    return d


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
