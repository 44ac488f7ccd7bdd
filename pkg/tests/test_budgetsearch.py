import math
import warnings
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from multiphase_ic.budgetsearch import (
    COARSE,
    DEGENERATE,
    HYPERCUBE,
    PERTURBATION,
    SearchPlan,
    SplitEvaluator,
    coarse_grid,
    fine_neighborhood,
    heatmap_csv,
    perturbations,
    read_trace_csv,
    search_optimal_split,
    trace_csv,
)
from multiphase_ic.errors import ValidationError
from multiphase_ic.graph import assign_uniform, from_edges
from multiphase_ic.livegraph import sample_ensemble
from multiphase_ic.multiphase import BudgetSplit, run_multiphase
from multiphase_ic.seedselect import SelectorSpec


@pytest.mark.parametrize("p", [2, 3, 4, 5])
@pytest.mark.parametrize("k", [20, 50, 200])
def test_coarse_grid_size_and_shape(p, k):
    grid = coarse_grid(SearchPlan(k, p))
    assert len(grid) == math.comb(9, p - 1)
    assert len(set(grid)) == len(grid)
    for s in grid:
        assert s.total == k and s.phases == p
        assert all(a > 0 for a in s.allocations)


def test_two_phase_coarse_grid_listing():
    grid = coarse_grid(SearchPlan(20, 2))
    assert [s.allocations for s in grid] == [(2 * j, 20 - 2 * j) for j in range(1, 10)]


def test_free_coordinates_are_floored():
    grid = coarse_grid(SearchPlan(25, 3))
    assert (2, 2, 21) in {s.allocations for s in grid}


def test_plan_validation():
    with pytest.raises(ValidationError):
        SearchPlan(20, 2, coarse_step=0.3)
    with pytest.raises(ValidationError):
        SearchPlan(20, 2, top_refine=0)
    with pytest.raises(ValidationError):
        SearchPlan(20, 2, strategy="golden")


def test_perturbations_drop_negative_coordinates():
    plan = SearchPlan(20, 3)
    moves = perturbations(BudgetSplit.of(0, 19, 1), plan)
    assert sorted(s.allocations for _, s in moves) == [(0, 18, 2), (0, 20, 0), (1, 19, 0)]


def test_degenerate_hypercube_only_perturbs():
    plan = SearchPlan(200, 4)
    best = BudgetSplit.of(40, 60, 50, 50)
    out = fine_neighborhood(best, plan, lambda s, prov: 1.0 if s == best else 0.0)
    assert len(out) == 2 * 3
    assert {prov for _, prov in out} == {PERTURBATION}


def test_three_phase_all_increments_win():
    plan = SearchPlan(200, 3)
    best = BudgetSplit.of(60, 60, 80)
    out = fine_neighborhood(best, plan, lambda s, prov: s.allocations[0] + s.allocations[1])
    corners = [s for s, prov in out if prov == HYPERCUBE]
    assert [s.allocations for s in corners] == [(70, 70, 60)]
    assert len(out) == 4 + 1


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.integers(0, 125), st.integers(0, 2**32 - 1))
def test_new_split_count_is_bounded(p, pick, seed):
    plan = SearchPlan(200, p)
    grid = coarse_grid(plan)
    best = grid[pick % len(grid)]
    rng = np.random.default_rng(seed)
    scores = {}
    seen = Counter()

    def score(s, prov):
        seen[s] += 1
        return scores.setdefault(s, float(rng.random()))

    out = fine_neighborhood(best, plan, score)
    new = {s for s, _ in out} - {best}
    assert len(new) == len(out)
    assert len(new) <= 2 ** (p - 1) - p + 2 * (p - 1)


def _toy(p_edge=0.6, seed=0, m_count=80):
    # two symmetric three-node cliques
    edges = [(a + o, b + o, p_edge) for o in (0, 3) for a in range(3) for b in range(3) if a != b]
    g = from_edges(6, edges)
    return g, sample_ensemble(g, m_count, seed)


def test_two_phase_search_matches_exhaustive_evaluation():
    g, e = _toy()
    spec = SelectorSpec()
    result = search_optimal_split(g, e, SearchPlan(2, 2), spec)
    exhaustive = {(a, 2 - a): run_multiphase(g, e, BudgetSplit.of(a, 2 - a), spec).mean for a in range(3)}
    exhaustive[(0, 2)] = exhaustive[(2, 0)] = run_multiphase(g, e, BudgetSplit.of(2), spec).mean
    best = max(exhaustive.values())
    assert result.best.mean == pytest.approx(best)
    assert result.best.split.allocations == min(s for s, v in exhaustive.items() if v == best)
    assert sorted(x.split.allocations for x in result.entries) == [(0, 2), (1, 1), (2, 0)]


def test_two_phase_trace_has_every_fine_multiple():
    g = random_graph(np.random.default_rng(1), 30, 80, 0.05, 0.3)
    e = sample_ensemble(g, 40, seed=1)
    result = search_optimal_split(g, e, SearchPlan(20, 2), SelectorSpec())
    assert [x.split.allocations for x in result.entries] == [(j, 20 - j) for j in range(21)]
    assert result.evaluations == 20
    ends = [x for x in result.entries if x.provenance == DEGENERATE]
    assert [x.phase_means for x in ends] == [(0.0, ends[0].mean), (ends[1].mean, 0.0)]


def test_memoisation_and_dominance():
    g = random_graph(np.random.default_rng(2), 25, 70, 0.05, 0.4)
    e = sample_ensemble(g, 30, seed=2)
    spec = SelectorSpec()
    calls = Counter()

    def run(split):
        calls[split] += 1
        return run_multiphase(g, e, split, spec)

    evaluator = SplitEvaluator(run)
    two = search_optimal_split(g, e, SearchPlan(20, 2), spec, evaluator=evaluator)
    three = search_optimal_split(g, e, SearchPlan(20, 3, top_refine=3), spec, lower=two, evaluator=evaluator)
    assert max(calls.values()) == 1
    assert evaluator.evaluations == sum(calls.values())
    coarse = [x for x in three.entries if x.provenance == COARSE]
    assert len(coarse) == 36
    assert all(three.best.mean >= x.mean for x in three.entries)
    padded = [x for x in three.entries if x.provenance == DEGENERATE]
    assert padded and all(0 in x.split.allocations for x in padded)
    assert all(x.split not in calls for x in padded)
    assert len(three.neighborhood_sizes) == 3
    assert all(n <= 2 ** 2 - 3 + 4 for n in three.neighborhood_sizes)


def test_flat_landscape_is_flagged():
    cycle = assign_uniform(from_edges(5, [(i, (i + 1) % 5) for i in range(5)]), 1.0)
    e = sample_ensemble(cycle, 5, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = search_optimal_split(cycle, e, SearchPlan(10, 3), SelectorSpec())
    assert result.flat
    assert {x.mean for x in result.entries} == {5.0}


def test_unimodal_strategy_improves_on_coarse_best():
    g = random_graph(np.random.default_rng(3), 25, 70, 0.05, 0.4)
    e = sample_ensemble(g, 30, seed=3)
    result = search_optimal_split(g, e, SearchPlan(20, 3, strategy="unimodal"), SelectorSpec())
    coarse_best = max(x.mean for x in result.entries if x.provenance == COARSE)
    assert result.best.mean >= coarse_best


@pytest.mark.filterwarnings("ignore:budget")
def test_trace_and_heatmap_round_trip():
    g, e = _toy(seed=4)
    result = search_optimal_split(g, e, SearchPlan(10, 3, top_refine=2), SelectorSpec())
    back = read_trace_csv(trace_csv(result))
    assert [(x.split, x.mean, x.phase_means, x.provenance) for x in back] == [
        (x.split, x.mean, x.phase_means, x.provenance) for x in result.entries]
    rows = heatmap_csv(result).splitlines()
    assert rows[0] == "k1,k2,k3,mean" and len(rows) == len(result.entries) + 1
    two = search_optimal_split(g, e, SearchPlan(10, 2), SelectorSpec())
    with pytest.raises(ValidationError):
        heatmap_csv(two)
