import numpy as np
import pytest

from multiphase_ic.cli import fixture_text
from multiphase_ic.graph import WeightedDigraph, parse_edge_list


@pytest.fixture
def five_node():
    return parse_edge_list(fixture_text())


def random_graph(rng: np.random.Generator, n: int, m: int, p_low=0.05, p_high=0.95) -> WeightedDigraph:
    """Random simple digraph on ``n`` nodes with at most ``m`` edges."""
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    m = min(m, len(pairs))
    pick = rng.choice(len(pairs), size=m, replace=False)
    edges = sorted(pairs[i] for i in pick)
    prob = rng.uniform(p_low, p_high, size=m)
    return WeightedDigraph(n, [u for u, _ in edges], [v for _, v in edges], prob)


def ba_graph(n: int, m: int, seed: int) -> WeightedDigraph:
    """Barabasi-Albert graph with both directions of every edge and WC weights."""
    import networkx as nx

    from multiphase_ic.graph import assign_weighted_cascade

    und = nx.barabasi_albert_graph(n, m, seed=seed)
    src, dst = [], []
    for u, v in und.edges():
        src += [u, v]
        dst += [v, u]
    return assign_weighted_cascade(WeightedDigraph(n, src, dst))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
