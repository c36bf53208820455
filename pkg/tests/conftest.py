import numpy as np
import pytest

from dmgso.graph_core import build_graph


def random_weights(n, rng, density=0.5):
    """Symmetric nonnegative weights on a random graph that contains a spanning path."""
    w = rng.uniform(0.1, 1.0, size=(n, n)) * (rng.uniform(size=(n, n)) < density)
    w = np.triu(w, 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        w[min(a, b), max(a, b)] = rng.uniform(0.1, 1.0)
    return w + w.T


def path_weights(n):
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    return w


def cycle_weights(n):
    w = path_weights(n)
    w[0, n - 1] = w[n - 1, 0] = 1.0
    return w


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_graph(rng):
    return build_graph(random_weights(8, rng))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
