import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from encgnn.ckks import kernels
from encgnn.graph.io import PlainGraph
from encgnn.he import HEParams, make_backend

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

SMALL = HEParams(1024, (60,) + (40,) * 8 + (60,), 40)


@pytest.fixture(params=kernels.available())
def kernel(request):
    prev = kernels.use(request.param)
    yield request.param
    kernels.impl = prev


@pytest.fixture(params=["sim", "ckks"])
def backend_name(request):
    return request.param


@pytest.fixture
def backend(backend_name):
    return make_backend(backend_name, SMALL, seed=7)


@pytest.fixture
def keys(backend):
    return backend.keygen()


@pytest.fixture
def sim():
    return make_backend("sim", HEParams.preset("sim"), seed=0)


def path_graph(n=3, d0=2):
    adj = np.zeros((n, n))
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = 1
    feats = np.arange(n * d0, dtype=float).reshape(n, d0) / 4 - 0.5
    return PlainGraph(adj, feats)


def random_graph(rng, n, p=0.3, d0=2, labels=False):
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = (upper | upper.T).astype(float)
    feats = rng.uniform(-1, 1, size=(n, d0))
    lab = rng.integers(0, 2, n) if labels else None
    return PlainGraph(adj, feats, lab)


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
