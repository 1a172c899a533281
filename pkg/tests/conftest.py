import sys

import numpy as np
import pytest

from hypertrust.hypergraph import Hypergraph, RelationKind


def random_hypergraph(rng, n_devices, n_edges, max_size=None, zero_weight_prob=0.0):
    g = Hypergraph(n_devices)
    kinds = list(RelationKind)
    max_size = max_size or n_devices
    while g.num_hyperedges < n_edges:
        size = int(rng.integers(1, max_size + 1))
        members = rng.choice(n_devices, size=size, replace=False)
        w = 0.0 if rng.random() < zero_weight_prob else float(rng.choice([0.5, 1.0, 2.0]))
        g.add_hyperedge(members, w, kinds[int(rng.integers(len(kinds)))])
    return g


@pytest.fixture
def small_graph():
    return random_hypergraph(np.random.default_rng(11), 5, 6)


def pytest_terminal_summary(terminalreporter):
    # per-criterion lines survive output capture here
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
