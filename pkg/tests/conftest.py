import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from motifbackdoor.graph import Graph


def make_graph(n, edges, label=None, dim=3, seed=0):
    rng = np.random.default_rng(seed)
    return Graph(n, edges, rng.normal(size=(n, dim)), label)


def path(n, **kw):
    return make_graph(n, [(i, i + 1) for i in range(n - 1)], **kw)


def cycle(n, **kw):
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)], **kw)


def star(leaves, **kw):
    return make_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)], **kw)


def complete(n, **kw):
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
