"""Presampled live-graph ensembles and diffusion states over them."""

from __future__ import annotations

import hashlib
import json
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import ValidationError
from .graph import WeightedDigraph

ENSEMBLE_MAGIC = b"MPICENS1\n"
MAIN_STREAM = 0
SELECTION_STREAM = 1
_CHUNK = 256


def graph_fingerprint(g: WeightedDigraph) -> str:
    h = hashlib.sha256()
    h.update(np.int64(g.node_count).tobytes())
    for arr in (g.sources, g.targets, g.prob):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def graph_stream(seed: int, index: int, stream: int = MAIN_STREAM) -> np.random.Generator:
    """Independent generator for live graph ``index``; order and worker agnostic."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream, index))))


class LiveGraphEnsemble:
    """``count`` live graphs of ``graph`` stored as packed edge-presence rows."""

    def __init__(self, graph: WeightedDigraph, packed: np.ndarray, master_seed: int, stream: int = MAIN_STREAM):
        packed = np.ascontiguousarray(packed, dtype=np.uint8)
        if packed.ndim != 2 or packed.shape[1] != (graph.edge_count + 7) // 8:
            raise ValidationError("packed presence rows do not match the graph's edge count")
        if packed.shape[0] < 1:
            raise ValidationError("an ensemble needs at least one live graph")
        packed.setflags(write=False)
        self.graph = graph
        self.packed = packed
        self.master_seed = int(master_seed)
        self.stream = stream
        self._lock = threading.Lock()
        self._reach_memo: dict[tuple[int, int], frozenset] = {}
        self._singleton_totals = None

    @classmethod
    def from_presence(cls, graph, presence, master_seed=0, stream=MAIN_STREAM):
        presence = np.atleast_2d(np.asarray(presence, dtype=bool))
        return cls(graph, np.packbits(presence, axis=1), master_seed, stream)

    @property
    def count(self) -> int:
        return self.packed.shape[0]

    def __len__(self):
        return self.count

    @property
    def fingerprint(self) -> str:
        """Short digest of the graph and every presence row."""
        h = hashlib.sha256(graph_fingerprint(self.graph).encode())
        h.update(self.packed.tobytes())
        return h.hexdigest()[:16]

    def presence(self, i: int) -> np.ndarray:
        self._check_index(i)
        return np.unpackbits(self.packed[i], count=self.graph.edge_count).astype(bool)

    def live_edges(self, i: int) -> np.ndarray:
        """``(k, 2)`` array of the edges kept in live graph ``i``."""
        keep = self.presence(i)
        return np.column_stack([self.graph.sources[keep], self.graph.targets[keep]])

    def _check_index(self, i):
        if not 0 <= i < self.count:
            raise IndexError(f"live graph index {i} out of range [0, {self.count})")

    @lru_cache(maxsize=4096)
    def condensation(self, i: int):
        """(component label per node, condensed DAG successor sets) for graph ``i``."""
        n = self.graph.node_count
        edges = self.live_edges(i)
        adj = csr_matrix((np.ones(len(edges), dtype=np.int8), (edges[:, 0], edges[:, 1])), shape=(n, n))
        ncomp, labels = connected_components(adj, directed=True, connection="strong")
        succ = [set() for _ in range(ncomp)]
        for cu, cv in zip(labels[edges[:, 0]].tolist(), labels[edges[:, 1]].tolist()):
            if cu != cv:
                succ[cu].add(cv)
        members = [[] for _ in range(ncomp)]
        for node, c in enumerate(labels.tolist()):
            members[c].append(node)
        return labels, tuple(frozenset(s) for s in succ), tuple(tuple(m) for m in members)

    def _component_reach(self, i: int, c: int) -> frozenset:
        key = (i, c)
        with self._lock:
            hit = self._reach_memo.get(key)
        if hit is not None:
            return hit
        _, succ, members = self.condensation(i)
        seen = {c}
        stack = [c]
        while stack:
            x = stack.pop()
            for y in succ[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        nodes = frozenset(v for x in seen for v in members[x])
        with self._lock:
            if len(self._reach_memo) > 1_000_000:
                self._reach_memo.clear()
            self._reach_memo[key] = nodes
        return nodes

    def reach(self, i: int, sources) -> frozenset:
        """All nodes reachable from ``sources`` in live graph ``i`` (sources included)."""
        self._check_index(i)
        sources = list(sources)
        if not sources:
            return frozenset()
        labels, _, _ = self.condensation(i)
        comps = {int(labels[s]) for s in sources}
        out = set()
        for c in comps:
            out |= self._component_reach(i, c)
        return frozenset(out)

    def singleton_totals(self) -> np.ndarray:
        """Sum over live graphs of |reach(v)| for every node ``v`` (cached)."""
        if self._singleton_totals is None:
            self._singleton_totals = reach_size_totals(self, np.zeros(self.graph.node_count, dtype=bool))
        return self._singleton_totals

    def __repr__(self):
        return f"LiveGraphEnsemble(M={self.count}, seed={self.master_seed}, graph={self.graph!r})"


def reach_size_totals(e: LiveGraphEnsemble, blocked: np.ndarray) -> np.ndarray:
    """Per node, reachable-set sizes avoiding ``blocked`` summed over all live graphs."""
    indptr, targets, eids = e.graph.out_csr
    blocked = np.ascontiguousarray(blocked, dtype=np.bool_)
    total = np.zeros(e.graph.node_count, dtype=np.int64)
    for lo in range(0, e.count, _CHUNK):
        sizes = _kernels.reach_sizes(indptr, targets, eids, e.packed[lo:lo + _CHUNK], blocked)
        total += sizes.sum(axis=0)
    return total


def sample_ensemble(g: WeightedDigraph, m_count: int, seed: int, stream: int = MAIN_STREAM) -> LiveGraphEnsemble:
    """Sample ``m_count`` live graphs; edge (u, v) is kept with probability p_uv."""
    if not g.has_probabilities:
        raise ValidationError("edge probabilities must be assigned before sampling live graphs")
    if m_count < 1:
        raise ValidationError("ensemble size must be at least 1")
    m = g.edge_count
    packed = np.zeros((m_count, (m + 7) // 8), dtype=np.uint8)
    for i in range(m_count):
        keep = graph_stream(seed, i, stream).random(m) < g.prob
        packed[i] = np.packbits(keep)
    return LiveGraphEnsemble(g, packed, seed, stream)


def save_ensemble(e: LiveGraphEnsemble, path) -> None:
    header = {
        "master_seed": e.master_seed,
        "stream": e.stream,
        "count": e.count,
        "edge_count": e.graph.edge_count,
        "node_count": e.graph.node_count,
        "graph": graph_fingerprint(e.graph),
    }
    with open(path, "wb") as fh:
        fh.write(ENSEMBLE_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(e.packed.tobytes())


def load_ensemble(path, g: WeightedDigraph) -> LiveGraphEnsemble:
    data = Path(path).read_bytes()
    if not data.startswith(ENSEMBLE_MAGIC):
        raise ValidationError(f"{path} is not an ensemble file")
    rest = data[len(ENSEMBLE_MAGIC):]
    line, _, body = rest.partition(b"\n")
    header = json.loads(line)
    if header["graph"] != graph_fingerprint(g):
        raise ValidationError("ensemble was sampled from a different graph")
    width = (header["edge_count"] + 7) // 8
    packed = np.frombuffer(body, dtype=np.uint8).reshape(header["count"], width)
    return LiveGraphEnsemble(g, packed.copy(), header["master_seed"], header.get("stream", MAIN_STREAM))


@dataclass
class DiffusionState:
    """Influenced nodes per live graph (rows of a boolean matrix) after ``phase`` phases."""

    influenced: np.ndarray
    phase: int = 0

    @classmethod
    def fresh(cls, e: LiveGraphEnsemble) -> "DiffusionState":
        return cls(np.zeros((e.count, e.graph.node_count), dtype=bool), 0)

    def sizes(self) -> np.ndarray:
        return self.influenced.sum(axis=1)

    def copy(self) -> "DiffusionState":
        return DiffusionState(self.influenced.copy(), self.phase)


def _flatten_seeds(new_seeds, m_graphs):
    if len(new_seeds) == 0 or np.ndim(new_seeds[0]) == 0:
        new_seeds = [new_seeds] * m_graphs
    if len(new_seeds) != m_graphs:
        raise ValidationError("need one seed collection per live graph")
    lens = np.array([len(s) for s in new_seeds], dtype=np.int64)
    ptr = np.zeros(m_graphs + 1, dtype=np.int64)
    np.cumsum(lens, out=ptr[1:])
    flat = np.fromiter((int(v) for s in new_seeds for v in s), dtype=np.int64, count=int(ptr[-1]))
    return flat, ptr


def advance_state(e: LiveGraphEnsemble, state: DiffusionState, new_seeds) -> DiffusionState:
    """Close ``influenced ∪ new_seeds[i]`` under reachability in each live graph.

    ``new_seeds`` is either one seed list per live graph or a single list applied
    to every graph.
    """
    if state.influenced.shape != (e.count, e.graph.node_count):
        raise ValidationError("state does not match the ensemble")
    flat, ptr = _flatten_seeds(list(new_seeds), e.count)
    if len(flat) and (flat.min() < 0 or flat.max() >= e.graph.node_count):
        raise ValidationError("seed node out of range")
    out = state.influenced.copy()
    indptr, targets, eids = e.graph.out_csr
    _kernels.close_states(indptr, targets, eids, e.packed, out, flat, ptr)
    return DiffusionState(out, state.phase + 1)


def spread_sizes(e: LiveGraphEnsemble, seeds) -> np.ndarray:
    """|reach(seeds)| in every live graph."""
    return advance_state(e, DiffusionState.fresh(e), list(seeds)).sizes()


@dataclass(frozen=True)
class SpreadDistribution:
    sizes: np.ndarray
    mean: float
    std: float

    @property
    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.sizes.tolist()).items()))


def describe(sizes) -> SpreadDistribution:
    """Mean and sample (n-1) standard deviation of a per-graph size vector."""
    sizes = np.asarray(sizes, dtype=np.int64)
    mean = float(sizes.sum()) / len(sizes)
    std = float(np.std(sizes, ddof=1)) if len(sizes) > 1 else 0.0
    return SpreadDistribution(sizes, mean, std)


def spread_distribution(state: DiffusionState) -> SpreadDistribution:
    return describe(state.sizes())


def simulate_cascade(g: WeightedDigraph, seeds, coins=None, rng=None) -> frozenset:
    """Step-by-step IC diffusion.

    The coin of edge (u, v) is consulted when u first becomes influenced; pass
    ``coins`` (one boolean per edge) to fix the outcomes, or ``rng`` to flip
    them on demand.
    """
    indptr, targets, eids = g.out_csr
    active = set(int(s) for s in seeds)
    frontier = sorted(active)
    while frontier:
        nxt = []
        for u in frontier:
            for k in range(indptr[u], indptr[u + 1]):
                v = int(targets[k])
                if v in active:
                    continue
                e = eids[k]
                hit = coins[e] if coins is not None else rng.random() < g.prob[e]
                if hit:
                    active.add(v)
                    nxt.append(v)
        frontier = nxt
    return frozenset(active)
