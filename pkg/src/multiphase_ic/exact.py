"""Brute-force oracles for tiny graphs: every live graph is enumerated.

Reachability here is computed with plain numpy over all ``2**m`` edge masks,
independently of the compiled ensemble kernels, so the two can check each
other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import EnumerationLimitError, ValidationError
from .graph import WeightedDigraph
from .livegraph import LiveGraphEnsemble, spread_sizes


@dataclass(frozen=True)
class EnumerationLimit:
    max_edges: int = 20
    max_seed_subsets: int = 200_000


DEFAULT_LIMIT = EnumerationLimit()


def _check_edges(g: WeightedDigraph, limit: EnumerationLimit):
    if not g.has_probabilities:
        raise ValidationError("edge probabilities must be assigned")
    if g.edge_count > limit.max_edges:
        raise EnumerationLimitError(
            f"{g.edge_count} edges exceed the enumeration limit of {limit.max_edges} (2^{g.edge_count} live graphs)"
        )
    if g.node_count > 62:
        raise EnumerationLimitError("exact enumeration supports at most 62 nodes")


def live_graph_table(g: WeightedDigraph, limit: EnumerationLimit = DEFAULT_LIMIT):
    """All live graphs as a ``(2**m, m)`` presence matrix and their probabilities."""
    _check_edges(g, limit)
    m = g.edge_count
    codes = np.arange(2**m, dtype=np.int64)
    present = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
    prob = np.where(present, g.prob, 1.0 - g.prob).prod(axis=1) if m else np.ones(1)
    return present, prob


def total_probability(g: WeightedDigraph, limit: EnumerationLimit = DEFAULT_LIMIT) -> float:
    _, prob = live_graph_table(g, limit)
    return math.fsum(prob.tolist())


def reach_masks(g: WeightedDigraph, present: np.ndarray) -> np.ndarray:
    """``(L, n)`` int64 bitmasks: bit w of ``[l, v]`` is set iff w is reachable from v."""
    n = g.node_count
    reach = np.broadcast_to(np.int64(1) << np.arange(n, dtype=np.int64), (len(present), n)).copy()
    src, dst = g.sources, g.targets
    while True:
        before = reach.copy()
        for e in range(g.edge_count):
            u, w = src[e], dst[e]
            reach[:, u] |= np.where(present[:, e], reach[:, w], 0)
        if np.array_equal(before, reach):
            return reach


def _seed_mask(seeds) -> int:
    mask = 0
    for s in seeds:
        mask |= 1 << int(s)
    return mask


class _Enumerated:
    """Live-graph table plus per-node reach masks for one graph."""

    def __init__(self, g, limit):
        self.g = g
        self.present, self.prob = live_graph_table(g, limit)
        self.reach = reach_masks(g, self.present)

    def reached(self, seeds) -> np.ndarray:
        out = np.zeros(len(self.prob), dtype=np.int64)
        for s in seeds:
            out |= self.reach[:, int(s)]
        return out

    def spread(self, seeds) -> float:
        sizes = np.bitwise_count(self.reached(seeds))
        return math.fsum((self.prob * sizes).tolist())


def exact_spread(g: WeightedDigraph, seeds, limit: EnumerationLimit = DEFAULT_LIMIT) -> float:
    """Expected number of nodes reachable from ``seeds``, summed over all live graphs."""
    return _Enumerated(g, limit).spread(seeds)


def _best_subset(table: _Enumerated, budget: int, limit: EnumerationLimit):
    n = table.g.node_count
    budget = min(budget, n)
    if math.comb(n, budget) > limit.max_seed_subsets:
        raise EnumerationLimitError(f"C({n}, {budget}) seed sets exceed the limit of {limit.max_seed_subsets}")
    best, best_val = (), -1.0
    for subset in combinations(range(n), budget):
        val = table.spread(subset)
        if val > best_val + 1e-12:
            best, best_val = subset, val
    return best, best_val


def exact_optimal_seeds(g: WeightedDigraph, budget: int, limit: EnumerationLimit = DEFAULT_LIMIT):
    """Seed set of size ``min(budget, n)`` maximising the exact spread.

    Ties go to the lexicographically smallest set. Returns ``(seeds, value)``.
    """
    if budget < 0:
        raise ValidationError("budget must be non-negative")
    seeds, value = _best_subset(_Enumerated(g, limit), budget, limit)
    return frozenset(seeds), value


def exact_myopic_value(g: WeightedDigraph, split, limit: EnumerationLimit = DEFAULT_LIMIT) -> float:
    """Expected total spread of the myopic policy with exact per-phase optimisation.

    After each phase the observed influenced set is removed together with all
    edges touching it; edges from influenced to uninfluenced nodes already
    failed and are never re-tried. The next phase optimises over the residual
    graph with the original probabilities. Outcomes with the same influenced
    set are merged before re-optimising.
    """
    allocations = [int(k) for k in split]
    if any(k < 0 for k in allocations):
        raise ValidationError("allocations must be non-negative")
    return _myopic(g, allocations, limit)


def _myopic(g, allocations, limit):
    if not allocations or g.node_count == 0:
        return 0.0
    table = _Enumerated(g, limit)
    seeds, _ = _best_subset(table, allocations[0], limit)
    outcomes: dict[int, float] = {}
    for mask, p in zip(table.reached(seeds).tolist(), table.prob.tolist()):
        if p > 0:
            outcomes[mask] = outcomes.get(mask, 0.0) + p
    rest = allocations[1:]
    total = []
    for mask in sorted(outcomes):
        p = outcomes[mask]
        count = bin(mask).count("1")
        later = 0.0
        if rest and count < g.node_count:
            keep = [v for v in range(g.node_count) if not (mask >> v) & 1]
            sub, _ = g.induced_subgraph(keep)
            later = _myopic(sub, rest, limit)
        total.append(p * (count + later))
    return math.fsum(total)


@dataclass(frozen=True)
class EnsembleCheck:
    mc_mean: float
    exact: float
    z_score: float


def validate_ensemble(g: WeightedDigraph, e: LiveGraphEnsemble, seeds, limit: EnumerationLimit = DEFAULT_LIMIT):
    """Compare the ensemble mean spread with the exact expectation.

    ``z_score = |mc_mean - exact| / (std / sqrt(M))``. With zero sample
    spread the score is 0 when the two agree exactly and ``inf`` otherwise.
    """
    sizes = spread_sizes(e, list(seeds))
    mc = float(sizes.sum()) / len(sizes)
    exact = exact_spread(g, seeds, limit)
    std = float(np.std(sizes, ddof=1)) if len(sizes) > 1 else 0.0
    if std == 0.0:
        z = 0.0 if abs(mc - exact) < 1e-9 else math.inf
    else:
        z = abs(mc - exact) / (std / math.sqrt(len(sizes)))
    return EnsembleCheck(mc, exact, z)
