"""Directed graphs with per-edge influence probabilities.

Node ids are re-indexed densely on ingestion; the original labels are kept
on the graph and can be written to a sidecar file next to the edge list.
"""

from __future__ import annotations

import math
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphFormatError, ValidationError

TRIVALENCY_VALUES = (0.001, 0.01, 0.1)


def _label_order(labels: Iterable[str]) -> list[str]:
    labels = list(labels)
    try:
        return sorted(labels, key=int)
    except ValueError:
        return sorted(labels)


class WeightedDigraph:
    """Immutable directed graph on nodes ``0..n-1``.

    ``prob`` holds one influence probability per edge; ``nan`` marks an edge
    whose probability has not been assigned yet.
    """

    def __init__(self, node_count, sources, targets, prob=None, labels=None):
        self.node_count = int(node_count)
        self.sources = np.ascontiguousarray(sources, dtype=np.int64)
        self.targets = np.ascontiguousarray(targets, dtype=np.int64)
        if self.sources.shape != self.targets.shape or self.sources.ndim != 1:
            raise ValidationError("sources and targets must be 1-d arrays of equal length")
        if prob is None:
            prob = np.full(len(self.sources), np.nan)
        self.prob = np.ascontiguousarray(prob, dtype=np.float64)
        if self.prob.shape != self.sources.shape:
            raise ValidationError("one probability per edge is required")
        if labels is None:
            labels = [str(i) for i in range(self.node_count)]
        self.labels = tuple(str(x) for x in labels)
        if len(self.labels) != self.node_count:
            raise ValidationError("one label per node is required")
        self._validate()
        for arr in (self.sources, self.targets, self.prob):
            arr.setflags(write=False)

    def _validate(self):
        n = self.node_count
        if len(self.sources):
            lo = min(self.sources.min(), self.targets.min())
            hi = max(self.sources.max(), self.targets.max())
            if lo < 0 or hi >= n:
                raise ValidationError(f"node ids must lie in [0, {n})")
        loops = np.flatnonzero(self.sources == self.targets)
        if len(loops):
            u = self.labels[self.sources[loops[0]]]
            raise ValidationError(f"self-loop on node {u}")
        assigned = self.prob[~np.isnan(self.prob)]
        if np.any((assigned < 0) | (assigned > 1)):
            raise ValidationError("edge probabilities must lie in [0, 1]")
        keys = self.sources * max(n, 1) + self.targets
        uniq, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            key = uniq[np.argmax(counts > 1)]
            u, v = divmod(int(key), max(n, 1))
            raise ValidationError(f"duplicate edge ({self.labels[u]}, {self.labels[v]})")
        if len(set(self.labels)) != n:
            raise ValidationError("node labels must be unique")

    @property
    def edge_count(self) -> int:
        return len(self.sources)

    @property
    def has_probabilities(self) -> bool:
        return not np.any(np.isnan(self.prob))

    def with_probabilities(self, prob) -> "WeightedDigraph":
        return WeightedDigraph(self.node_count, self.sources, self.targets, prob, self.labels)

    @cached_property
    def out_csr(self):
        """(indptr, targets, edge ids) sorted by source then target."""
        order = np.lexsort((self.targets, self.sources))
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.sources, minlength=self.node_count), out=indptr[1:])
        return indptr, self.targets[order].copy(), order.astype(np.int64)

    @cached_property
    def in_csr(self):
        """(indptr, sources, edge ids) sorted by target then source."""
        order = np.lexsort((self.sources, self.targets))
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.targets, minlength=self.node_count), out=indptr[1:])
        return indptr, self.sources[order].copy(), order.astype(np.int64)

    def in_degree(self) -> np.ndarray:
        return np.bincount(self.targets, minlength=self.node_count)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.sources, minlength=self.node_count)

    def node_id(self, label) -> int:
        try:
            return self._label_index[str(label)]
        except KeyError:
            raise ValidationError(f"unknown node {label!r}") from None

    @cached_property
    def _label_index(self):
        return {lab: i for i, lab in enumerate(self.labels)}

    def induced_subgraph(self, nodes: Sequence[int]) -> tuple["WeightedDigraph", np.ndarray]:
        """Subgraph on ``nodes`` (ids kept in ascending order) and the new->old id map."""
        keep = np.zeros(self.node_count, dtype=bool)
        keep[list(nodes)] = True
        old_ids = np.flatnonzero(keep)
        new_id = np.full(self.node_count, -1, dtype=np.int64)
        new_id[old_ids] = np.arange(len(old_ids))
        emask = keep[self.sources] & keep[self.targets]
        sub = WeightedDigraph(
            len(old_ids),
            new_id[self.sources[emask]],
            new_id[self.targets[emask]],
            self.prob[emask],
            [self.labels[i] for i in old_ids],
        )
        return sub, old_ids

    def __eq__(self, other):
        if not isinstance(other, WeightedDigraph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and self.labels == other.labels
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.prob, other.prob, equal_nan=True)
        )

    __hash__ = None

    def __repr__(self):
        return f"WeightedDigraph(n={self.node_count}, m={self.edge_count})"


def _parse_lines(lines, undirected):
    edges = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(lineno, raw.rstrip("\n"), "expected 'u v' or 'u v p'")
        p = math.nan
        if len(parts) == 3:
            try:
                p = float(parts[2])
            except ValueError:
                raise GraphFormatError(lineno, raw.rstrip("\n"), "probability is not a number") from None
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"line {lineno}: probability {p} outside [0, 1]")
        u, v = parts[0], parts[1]
        if u == v:
            raise ValidationError(f"line {lineno}: self-loop on node {u}")
        edges.append((u, v, p))
        if undirected:
            edges.append((v, u, p))
    return edges


def parse_edge_list(text: str, undirected: bool = False, labels: Sequence[str] | None = None) -> WeightedDigraph:
    """Build a graph from edge-list text. See :func:`load_edge_list`."""
    edges = _parse_lines(text.splitlines(), undirected)
    if labels is None:
        labels = _label_order({x for u, v, _ in edges for x in (u, v)})
    index = {lab: i for i, lab in enumerate(labels)}
    seen = set()
    src, dst, prob = [], [], []
    for u, v, p in edges:
        if u not in index or v not in index:
            raise ValidationError(f"node {u if u not in index else v} missing from id map")
        key = (index[u], index[v])
        if key in seen:
            raise ValidationError(f"duplicate edge ({u}, {v})")
        seen.add(key)
        src.append(key[0])
        dst.append(key[1])
        prob.append(p)
    return WeightedDigraph(len(labels), src, dst, prob, labels)


def read_id_map(path) -> list[str]:
    """Read a sidecar id map (``original dense`` per line) ordered by dense id."""
    pairs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(lineno, raw, "expected 'original dense'")
        pairs.append((int(parts[1]), parts[0]))
    pairs.sort()
    if [d for d, _ in pairs] != list(range(len(pairs))):
        raise ValidationError("id map dense ids must be exactly 0..n-1")
    return [lab for _, lab in pairs]


def load_edge_list(path, undirected: bool = False, id_map=None) -> WeightedDigraph:
    """Read a whitespace edge list (``u v`` or ``u v p``; ``#`` comments).

    Labels are re-indexed densely: numerically if every label is an integer,
    lexicographically otherwise. Passing ``id_map`` pins the mapping (and
    preserves nodes without edges). With ``undirected`` every line yields two
    directed edges.
    """
    labels = read_id_map(id_map) if id_map is not None else None
    return parse_edge_list(Path(path).read_text(), undirected=undirected, labels=labels)


def id_map_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".ids")


def save_edge_list(g: WeightedDigraph, path) -> Path:
    """Write dense-id edges plus a sidecar id map; returns the sidecar path."""
    path = Path(path)
    lines = []
    for u, v, p in zip(g.sources.tolist(), g.targets.tolist(), g.prob.tolist()):
        lines.append(f"{u} {v}" if math.isnan(p) else f"{u} {v} {p!r}")
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    sidecar = id_map_path(path)
    sidecar.write_text("".join(f"{lab} {i}\n" for i, lab in enumerate(g.labels)))
    return sidecar


def load_saved(path) -> WeightedDigraph:
    """Reload a graph written by :func:`save_edge_list`, restoring labels."""
    labels = read_id_map(id_map_path(path))
    dense = parse_edge_list(Path(path).read_text(), labels=[str(i) for i in range(len(labels))])
    return WeightedDigraph(dense.node_count, dense.sources, dense.targets, dense.prob, labels)


def assign_weighted_cascade(g: WeightedDigraph) -> WeightedDigraph:
    """Set p_uv = 1 / in-degree(v) on every edge."""
    indeg = g.in_degree()
    return g.with_probabilities(1.0 / indeg[g.targets])


def assign_trivalency(g: WeightedDigraph, seed) -> WeightedDigraph:
    """Draw each p_uv uniformly from {0.001, 0.01, 0.1}."""
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, len(TRIVALENCY_VALUES), size=g.edge_count)
    return g.with_probabilities(np.asarray(TRIVALENCY_VALUES)[picks])


def assign_uniform(g: WeightedDigraph, p: float) -> WeightedDigraph:
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability {p} outside [0, 1]")
    return g.with_probabilities(np.full(g.edge_count, float(p)))


def from_edges(n: int, edges, labels=None) -> WeightedDigraph:
    """Convenience constructor from ``(u, v, p)`` triples on dense ids."""
    edges = list(edges)
    src = [e[0] for e in edges]
    dst = [e[1] for e in edges]
    prob = [e[2] if len(e) > 2 else math.nan for e in edges]
    return WeightedDigraph(n, src, dst, prob, labels)
