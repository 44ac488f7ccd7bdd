import networkx as nx
import numba
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from multiphase_ic.errors import ValidationError
from multiphase_ic.graph import parse_edge_list
from multiphase_ic.livegraph import (
    DiffusionState,
    LiveGraphEnsemble,
    advance_state,
    describe,
    load_ensemble,
    reach_size_totals,
    sample_ensemble,
    save_ensemble,
    simulate_cascade,
    spread_sizes,
)


def _nx_reach(e, i, seeds):
    h = nx.DiGraph()
    h.add_nodes_from(range(e.graph.node_count))
    h.add_edges_from(map(tuple, e.live_edges(i).tolist()))
    out = set(seeds)
    for s in seeds:
        out |= nx.descendants(h, s)
    return frozenset(out)


def test_seeded_sampling_is_reproducible_and_prefix_stable():
    g = random_graph(np.random.default_rng(0), 12, 30)
    a = sample_ensemble(g, 50, seed=5)
    b = sample_ensemble(g, 50, seed=5)
    assert np.array_equal(a.packed, b.packed)
    assert np.array_equal(sample_ensemble(g, 20, seed=5).packed, a.packed[:20])
    assert not np.array_equal(sample_ensemble(g, 50, seed=6).packed, a.packed)


def test_edge_frequencies_match_probabilities():
    g = random_graph(np.random.default_rng(1), 10, 25)
    e = sample_ensemble(g, 4000, seed=2)
    freq = np.mean([e.presence(i) for i in range(e.count)], axis=0)
    se = np.sqrt(g.prob * (1 - g.prob) / e.count)
    assert np.all(np.abs(freq - g.prob) < 5 * se + 1e-9)


def test_sampling_needs_probabilities_and_positive_count():
    g = parse_edge_list("0 1")
    with pytest.raises(ValidationError):
        sample_ensemble(g, 10, 0)
    with pytest.raises(ValidationError):
        sample_ensemble(g.with_probabilities([0.5]), 0, 0)


def test_five_node_seed_c_reaches_c_d_e(five_node):
    e = sample_ensemble(five_node, 200, seed=1)
    c, d, ee = (five_node.node_id(x) for x in "CDE")
    assert all(e.reach(i, [c]) == {c, d, ee} for i in range(e.count))
    assert np.all(spread_sizes(e, [c]) == 3)


def test_reach_index_out_of_range(five_node):
    e = sample_ensemble(five_node, 3, seed=1)
    with pytest.raises(IndexError):
        e.reach(3, [0])


def test_save_load_bit_identical(tmp_path, five_node):
    e = sample_ensemble(five_node, 100, seed=3)
    save_ensemble(e, tmp_path / "a.bin")
    save_ensemble(sample_ensemble(five_node, 100, seed=3), tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    back = load_ensemble(tmp_path / "a.bin", five_node)
    assert np.array_equal(back.packed, e.packed)
    assert back.master_seed == 3
    other = parse_edge_list("0 1 0.5")
    with pytest.raises(ValidationError):
        load_ensemble(tmp_path / "a.bin", other)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9), st.integers(0, 20))
def test_reach_paths_agree_with_graph_search(seed, n, m):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, m)
    e = sample_ensemble(g, 8, seed)
    seeds = sorted(rng.choice(n, size=rng.integers(1, n + 1), replace=False).tolist())
    sizes = spread_sizes(e, seeds)
    for i in range(e.count):
        want = _nx_reach(e, i, seeds)
        assert e.reach(i, seeds) == want
        assert sizes[i] == len(want)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_step_simulation_with_shared_coins_equals_reachability(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 8, 16)
    e = sample_ensemble(g, 5, seed)
    seeds = rng.choice(8, size=2, replace=False).tolist()
    for i in range(e.count):
        assert simulate_cascade(g, seeds, coins=e.presence(i)) == e.reach(i, seeds)


def test_reach_size_totals_match_singletons():
    g = random_graph(np.random.default_rng(4), 9, 20)
    e = sample_ensemble(g, 30, seed=4)
    blocked = np.zeros(9, dtype=bool)
    blocked[[1, 5]] = True
    totals = reach_size_totals(e, blocked)
    keep = [v for v in range(9) if not blocked[v]]
    sub, old = g.induced_subgraph(keep)
    for j, v in enumerate(old.tolist()):
        want = 0
        for i in range(e.count):
            live = e.presence(i)
            h = nx.DiGraph()
            h.add_nodes_from(keep)
            h.add_edges_from((int(a), int(b)) for a, b, x in zip(g.sources, g.targets, live)
                             if x and not blocked[a] and not blocked[b])
            want += 1 + len(nx.descendants(h, v))
        assert totals[v] == want
    assert np.all(totals[blocked] == 0)
    assert np.array_equal(e.singleton_totals(), reach_size_totals(e, np.zeros(9, dtype=bool)))


def test_advance_state_accepts_per_graph_seeds(five_node):
    e = LiveGraphEnsemble.from_presence(five_node, [[1, 0, 1, 1], [0, 0, 1, 1]])
    a, b = five_node.node_id("A"), five_node.node_id("B")
    state = advance_state(e, DiffusionState.fresh(e), [[a], [b]])
    assert state.sizes().tolist() == [4, 1]
    assert state.phase == 1
    with pytest.raises(ValidationError):
        advance_state(e, state, [[a]])


def test_worker_count_does_not_change_results(five_node):
    g = random_graph(np.random.default_rng(9), 30, 90)
    e = sample_ensemble(g, 300, seed=9)
    before = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        one = spread_sizes(e, [0, 1, 2])
    finally:
        numba.set_num_threads(before)
    assert np.array_equal(one, spread_sizes(e, [0, 1, 2]))


def test_describe_uses_sample_std():
    d = describe([1, 2, 3, 4])
    assert d.mean == 2.5
    assert d.std == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert d.histogram == {1: 1, 2: 1, 3: 1, 4: 1}
    assert describe([7]).std == 0.0


def test_capacity_at_collaboration_network_scale():
    # synthetic graph with the node and edge counts of a 15k-author network
    rng = np.random.default_rng(0)
    n, m = 15233, 62774
    pairs = np.unique(rng.integers(0, n, size=(m, 2)), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    from multiphase_ic.graph import WeightedDigraph, assign_weighted_cascade

    g = assign_weighted_cascade(WeightedDigraph(n, pairs[:, 0], pairs[:, 1]))
    e = sample_ensemble(g, 10_000, seed=1)
    assert e.packed.nbytes <= 100 * 2**20
    sizes = spread_sizes(e, list(range(20)))
    assert sizes.shape == (10_000,) and sizes.min() >= 20


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_reach_grows_with_the_seed_set(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 10, 25)
    e = sample_ensemble(g, 10, seed)
    s = rng.choice(10, size=3, replace=False).tolist()
    v = int(rng.integers(10))
    for i in range(e.count):
        assert e.reach(i, s) <= e.reach(i, s + [v])
