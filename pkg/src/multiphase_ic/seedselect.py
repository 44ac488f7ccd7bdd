"""Seed selectors applied to the residual (not yet influenced) part of a graph.

Every selector takes the set of already-influenced nodes as a boolean mask and
never returns one of them. Ties go to the lowest node id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from . import _kernels
from .errors import ValidationError
from .graph import WeightedDigraph
from .livegraph import SELECTION_STREAM, LiveGraphEnsemble, reach_size_totals, sample_ensemble

GREEDY = "live-graph-greedy"
DEGREE_DISCOUNT = "degree-discount"
IRIE = "irie"
SELECTOR_KINDS = (GREEDY, DEGREE_DISCOUNT, IRIE)


@dataclass(frozen=True)
class SelectorSpec:
    """Which selector to run and its knobs.

    ``sample_count`` only affects the greedy selector: when set, marginal gains
    are estimated on a dedicated ensemble of that size, sampled independently
    of the ensemble used to score the outcome.
    """

    kind: str = GREEDY
    irie_alpha: float = 0.7
    irie_iterations: int = 20
    convergence_tol: float = 1e-4
    sample_count: int | None = None

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValidationError(f"unknown selector {self.kind!r}; expected one of {SELECTOR_KINDS}")
        if not 0.0 < self.irie_alpha < 1.0:
            raise ValidationError("irie_alpha must lie in (0, 1)")
        if self.irie_iterations < 1:
            raise ValidationError("irie_iterations must be at least 1")
        if self.sample_count is not None and self.sample_count < 1:
            raise ValidationError("sample_count must be at least 1")


def selection_ensemble(g: WeightedDigraph, e: LiveGraphEnsemble, spec: SelectorSpec) -> LiveGraphEnsemble:
    """Ensemble the greedy selector estimates gains on."""
    if spec.kind != GREEDY or spec.sample_count is None:
        return e
    return sample_ensemble(g, spec.sample_count, e.master_seed, stream=SELECTION_STREAM)


def _mask(g, influenced):
    if influenced is None:
        return np.zeros(g.node_count, dtype=bool)
    influenced = np.asarray(influenced, dtype=bool)
    if influenced.shape != (g.node_count,):
        raise ValidationError("influenced mask must have one entry per node")
    return influenced


def _check_budget(budget):
    if budget < 0:
        raise ValidationError(f"budget must be non-negative, got {budget}")


def select_seeds(g: WeightedDigraph, e: LiveGraphEnsemble | None, influenced, budget: int, spec: SelectorSpec) -> list[int]:
    """Pick ``min(budget, #uninfluenced)`` seeds with the selector named by ``spec``."""
    _check_budget(budget)
    if spec.kind == GREEDY:
        if e is None:
            raise ValidationError("the greedy selector needs a live-graph ensemble")
        return greedy_celf(g, e, influenced, budget)
    if spec.kind == DEGREE_DISCOUNT:
        return degree_discount(g, influenced, budget)
    return irie_select(g, influenced, budget, spec)


BITSET_MEMORY_LIMIT = 256 * 2**20


def greedy_celf(g: WeightedDigraph, e: LiveGraphEnsemble, influenced, budget: int, return_gains: bool = False):
    """Lazy greedy maximisation of ensemble coverage on the residual graph.

    The gain of ``v`` is the number of nodes, summed over live graphs, that
    become reachable from ``v`` without passing through influenced nodes or
    nodes already covered by earlier picks. Gains are integer counts, so the
    lazy order matches plain greedy exactly.
    """
    _check_budget(budget)
    blocked = np.ascontiguousarray(_mask(g, influenced))
    budget = min(budget, int((~blocked).sum()))
    if budget == 0:
        return ([], []) if return_gains else []
    indptr, targets, eids = g.out_csr
    words = (g.node_count + 63) // 64
    if e.count * g.node_count * words * 8 <= BITSET_MEMORY_LIMIT:
        bits = _kernels.residual_bitsets(indptr, targets, eids, e.packed, blocked)
        seeds, gains = _kernels.lazy_greedy_bitsets(bits, blocked, budget)
        seeds, gains = seeds.tolist(), gains.tolist()
    else:
        seeds, gains = _greedy_by_search(g, e, blocked, budget)
    return (seeds, gains) if return_gains else seeds


def _greedy_by_search(g, e, blocked, budget):
    """Same lazy greedy, re-evaluating gains by graph search instead of bitsets."""
    indptr, targets, eids = g.out_csr
    first = reach_size_totals(e, blocked) if blocked.any() else e.singleton_totals()
    heap = [(-int(first[v]), int(v), 0) for v in np.flatnonzero(~blocked)]
    heapq.heapify(heap)
    covered = np.zeros((e.count, g.node_count), dtype=np.bool_)
    seeds, gains = [], []
    while len(seeds) < budget:
        neg, v, stamp = heapq.heappop(heap)
        if stamp == len(seeds):
            _kernels.residual_gain(indptr, targets, eids, e.packed, blocked, covered, v, True)
            seeds.append(v)
            gains.append(-neg)
            continue
        gain = int(_kernels.residual_gain(indptr, targets, eids, e.packed, blocked, covered, v, False).sum())
        heapq.heappush(heap, (-gain, v, len(seeds)))
    return seeds, gains


def mean_edge_probability(g: WeightedDigraph) -> float:
    return float(g.prob.mean()) if g.edge_count else 0.0


def degree_discount(g: WeightedDigraph, influenced, budget: int, p: float | None = None) -> list[int]:
    """Degree-discount heuristic on the residual graph.

    ``d_v`` counts out-edges to uninfluenced nodes, ``t_v`` counts selected
    in-neighbours, and ``dd_v = d_v - 2 t_v - (d_v - t_v) t_v p`` with ``p``
    defaulting to the mean edge probability.
    """
    _check_budget(budget)
    blocked = _mask(g, influenced)
    if p is None:
        p = mean_edge_probability(g)
    keep = ~blocked[g.targets]
    d = np.bincount(g.sources[keep], minlength=g.node_count).astype(float)
    t = np.zeros(g.node_count)
    dd = d.copy()
    dd[blocked] = -np.inf
    budget = min(budget, int((~blocked).sum()))
    indptr, targets, _ = g.out_csr
    seeds = []
    for _ in range(budget):
        u = int(np.argmax(dd))
        seeds.append(u)
        dd[u] = -np.inf
        for v in targets[indptr[u]:indptr[u + 1]]:
            if np.isfinite(dd[v]):
                t[v] += 1
                dd[v] = d[v] - 2 * t[v] - (d[v] - t[v]) * t[v] * p
    return seeds


def _prob_matrix(g):
    return csr_matrix((g.prob, (g.sources, g.targets)), shape=(g.node_count, g.node_count))


def _not_yet_influenced(g, blocked, selected):
    """Probability each node escapes the current picks through a direct edge."""
    ap = np.ones(g.node_count)
    if selected:
        sel = np.zeros(g.node_count, dtype=bool)
        sel[selected] = True
        hit = sel[g.sources] & ~blocked[g.targets]
        np.multiply.at(ap, g.targets[hit], 1.0 - g.prob[hit])
        ap[sel] = 0.0
    ap[blocked] = 0.0
    return ap


def irie_rank(g: WeightedDigraph, influenced, spec: SelectorSpec, selected=(), start=None, matrix=None) -> np.ndarray:
    """Influence-rank fixpoint ``r = AP * (1 + alpha * P r)``.

    ``AP`` is zero for influenced and selected nodes and otherwise the product
    of ``1 - p_su`` over selected in-neighbours ``s``. Iteration stops when the
    largest change drops below ``spec.convergence_tol`` or after
    ``spec.irie_iterations`` rounds.
    """
    blocked = _mask(g, influenced)
    P = _prob_matrix(g) if matrix is None else matrix
    ap = _not_yet_influenced(g, blocked, list(selected))
    r = ap.copy() if start is None else np.asarray(start, dtype=float) * (ap > 0)
    for _ in range(spec.irie_iterations):
        nxt = ap * (1.0 + spec.irie_alpha * (P @ r))
        delta = np.max(np.abs(nxt - r)) if len(r) else 0.0
        r = nxt
        if delta < spec.convergence_tol:
            break
    return r


def irie_select(g: WeightedDigraph, influenced, budget: int, spec: SelectorSpec) -> list[int]:
    """Pick seeds one at a time by maximum rank, re-ranking after each pick."""
    _check_budget(budget)
    blocked = _mask(g, influenced)
    free = ~blocked
    budget = min(budget, int(free.sum()))
    P = _prob_matrix(g)
    seeds: list[int] = []
    r = None
    for _ in range(budget):
        r = irie_rank(g, blocked, spec, seeds, start=r, matrix=P)
        score = np.where(free, r, -np.inf)
        u = int(np.argmax(score))
        seeds.append(u)
        free[u] = False
    return seeds
