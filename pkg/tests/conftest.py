import random

import numpy as np
import pytest

from mqcwidth.graphs import Graph

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return random.Random(0)


@pytest.fixture
def nprng():
    return np.random.default_rng(0)


def fig1_tree_edges():
    # leaves 0..4; u=5 joins 0,1; w=6 joins u,2; x=7 joins 3,4; w-x is the root edge
    return ((0, 5), (1, 5), (5, 6), (2, 6), (6, 7), (3, 7), (4, 7))


def signs_oracle(g: Graph) -> np.ndarray:
    """Graph-state amplitudes by applying CZs one at a time to |+>^n (little-endian)."""
    n = g.n
    amps = np.full(1 << n, 2 ** (-n / 2), dtype=complex)
    for u, v in g.edges():
        for x in range(1 << n):
            if (x >> u) & 1 and (x >> v) & 1:
                amps[x] *= -1
    return amps
