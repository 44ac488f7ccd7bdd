"""Search for the budget split with the largest expected spread.

The default strategy evaluates a coarse grid of splits (multiples of a tenth
of the budget, every phase non-empty) and then refines around the best few
with single-coordinate perturbations and the hypercube spanned by the
per-coordinate winners. Two-phase searches simply scan every multiple of the
fine step.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Callable

from .errors import ValidationError
from .multiphase import BudgetSplit, run_multiphase
from .seedselect import SelectorSpec, selection_ensemble

COARSE = "coarse"
PERTURBATION = "fine-perturbation"
HYPERCUBE = "fine-hypercube"
EXHAUSTIVE = "exhaustive"
DEGENERATE = "degenerate"
UNIMODAL = "unimodal"


def _grid_count(step: float) -> int:
    count = round(1.0 / step)
    if count < 1 or abs(count * step - 1.0) > 1e-9:
        raise ValidationError(f"step {step} does not divide 1 into a whole number of parts")
    return count


@dataclass(frozen=True)
class SearchPlan:
    total_budget: int
    phases: int
    coarse_step: float = 0.1
    fine_step: float = 0.05
    top_refine: int = 10
    strategy: str = "grid"

    def __post_init__(self):
        if self.total_budget < 0:
            raise ValidationError("total budget must be non-negative")
        if self.phases < 1:
            raise ValidationError("need at least one phase")
        _grid_count(self.coarse_step)
        _grid_count(self.fine_step)
        if self.top_refine < 1:
            raise ValidationError("top_refine must be at least 1")
        if self.strategy not in ("grid", "unimodal"):
            raise ValidationError(f"unknown search strategy {self.strategy!r}")

    @property
    def fine_delta(self) -> int:
        """Fine step in seeds, rounded down."""
        return int(math.floor(self.fine_step * self.total_budget + 1e-9))


def split_from_units(units, step: float, k: int) -> BudgetSplit:
    """Allocations ``units[q] * step * k`` with free coordinates floored; the last takes the rest."""
    free = [int(math.floor(u * step * k + 1e-9)) for u in units[:-1]]
    return BudgetSplit(tuple(free) + (k - sum(free),))


def coarse_grid(plan: SearchPlan) -> list[BudgetSplit]:
    """Splits whose phases all get a positive multiple of ``coarse_step * k``.

    Equivalent to placing ``p - 1`` cuts among the interior grid points, so
    the default grid has ``C(9, p - 1)`` members.
    """
    parts = _grid_count(plan.coarse_step)
    p = plan.phases
    out, seen = [], set()
    for cuts in combinations(range(1, parts), p - 1):
        bounds = (0,) + cuts + (parts,)
        units = [b - a for a, b in zip(bounds, bounds[1:])]
        split = split_from_units(units, plan.coarse_step, plan.total_budget)
        if split not in seen:
            seen.add(split)
            out.append(split)
    return out


def perturbations(best: BudgetSplit, plan: SearchPlan) -> list[tuple[int, BudgetSplit]]:
    """``(coordinate, split)`` for every free coordinate moved by ±fine step.

    The last coordinate absorbs the change; moves that make any coordinate
    negative are dropped.
    """
    delta = plan.fine_delta
    h = list(best.allocations)
    k = best.total
    out = []
    if delta == 0:
        return out
    for q in range(len(h) - 1):
        for sign in (-1, 1):
            free = list(h[:-1])
            free[q] += sign * delta
            last = k - sum(free)
            if free[q] < 0 or last < 0:
                continue
            out.append((q, BudgetSplit(tuple(free) + (last,))))
    return out


def hypercube_vertices(best: BudgetSplit, winners) -> list[BudgetSplit]:
    """Vertices of the box spanned by ``best`` and the per-coordinate ``winners``
    that differ from ``best`` in at least two coordinates (the others are already
    known). At most ``2**(p-1) - p`` splits."""
    h = best.allocations[:-1]
    k = best.total
    axes = [(hq,) if hq == zq else (hq, zq) for hq, zq in zip(h, winners)]
    out = []
    for free in product(*axes):
        changed = sum(a != b for a, b in zip(free, h))
        last = k - sum(free)
        if changed >= 2 and last >= 0:
            out.append(BudgetSplit(tuple(free) + (last,)))
    return out


def _key(split: BudgetSplit, mean: float):
    return (-mean, split.allocations)


def fine_neighborhood(best: BudgetSplit, plan: SearchPlan, score: Callable[[BudgetSplit, str], float]):
    """Splits examined around ``best``: perturbations first, then hypercube vertices.

    ``score(split, provenance)`` returns a split's mean spread. Per coordinate
    the winner among decrement, unchanged and increment defines the box.
    Returns ``[(split, provenance), ...]``.
    """
    base = score(best, PERTURBATION)
    moves = perturbations(best, plan)
    examined = []
    candidates: dict[int, list] = {q: [(best, base)] for q in range(best.phases - 1)}
    for q, split in moves:
        examined.append((split, PERTURBATION))
        candidates[q].append((split, score(split, PERTURBATION)))
    winners = []
    for q in range(best.phases - 1):
        split, _ = min(candidates[q], key=lambda sv: _key(sv[0], sv[1]))
        winners.append(split.allocations[q])
    for split in hypercube_vertices(best, winners):
        score(split, HYPERCUBE)
        examined.append((split, HYPERCUBE))
    return examined


@dataclass
class SearchEntry:
    split: BudgetSplit
    mean: float
    std: float
    phase_means: tuple[float, ...]
    provenance: str
    wall_time: float = 0.0


@dataclass
class SearchResult:
    """Evaluated splits in evaluation order; ``evaluations`` counts simulations run by this search."""

    plan: SearchPlan
    entries: list[SearchEntry]
    evaluations: int
    flat: bool = False
    neighborhood_sizes: list[int] = field(default_factory=list)

    @property
    def best(self) -> SearchEntry:
        return min(self.entries, key=lambda e: _key(e.split, e.mean))

    def ranked(self) -> list[SearchEntry]:
        return sorted(self.entries, key=lambda e: _key(e.split, e.mean))

    def to_dict(self) -> dict:
        best = self.best
        return {
            "phases": self.plan.phases,
            "total_budget": self.plan.total_budget,
            "strategy": self.plan.strategy,
            "best_split": list(best.split.allocations),
            "best_mean": best.mean,
            "best_phase_means": list(best.phase_means),
            "evaluated": self.evaluations,
            "trace_rows": len(self.entries),
            "flat_landscape": self.flat,
        }


class SplitEvaluator:
    """Memoised ``split -> SearchEntry``; each distinct split is simulated once."""

    def __init__(self, run: Callable[[BudgetSplit], object]):
        self._run = run
        self.memo: dict[BudgetSplit, SearchEntry] = {}
        self.order: list[BudgetSplit] = []
        self.evaluations = 0

    def __call__(self, split: BudgetSplit, provenance: str) -> SearchEntry:
        hit = self.memo.get(split)
        if hit is not None:
            return hit
        start = time.perf_counter()
        report = self._run(split)
        self.evaluations += 1
        entry = SearchEntry(
            split, report.mean, report.std, tuple(report.incremental_means.tolist()), provenance,
            time.perf_counter() - start,
        )
        self.memo[split] = entry
        self.order.append(split)
        return entry

    def add(self, entry: SearchEntry):
        if entry.split not in self.memo:
            self.memo[entry.split] = entry
            self.order.append(entry.split)

    def entries(self) -> list[SearchEntry]:
        return [self.memo[s] for s in self.order]


def _embed_lower(entry: SearchEntry, phases: int):
    """Zero-padded copies of a lower-phase entry, one per placement of the zeros."""
    allocs = entry.split.allocations
    extra = phases - len(allocs)
    out = []
    for zeros in combinations(range(phases), extra):
        it = iter(zip(allocs, entry.phase_means))
        alloc, means = [], []
        for q in range(phases):
            if q in zeros:
                alloc.append(0)
                means.append(0.0)
            else:
                a, m = next(it)
                alloc.append(a)
                means.append(m)
        out.append(SearchEntry(BudgetSplit(tuple(alloc)), entry.mean, entry.std, tuple(means), DEGENERATE, 0.0))
    return out


def search_optimal_split(g, e, plan: SearchPlan, spec: SelectorSpec, lower: SearchResult | None = None,
                         evaluator: SplitEvaluator | None = None) -> SearchResult:
    """Search budget splits of ``plan.total_budget`` over ``plan.phases`` phases.

    ``lower`` (a finished search with fewer phases) supplies splits with empty
    phases without re-simulating them. A shared ``evaluator`` lets several
    searches reuse simulated splits.
    """
    if evaluator is None:
        selection = selection_ensemble(g, e, spec)
        evaluator = SplitEvaluator(lambda split: run_multiphase(g, e, split, spec, selection))
    k, p = plan.total_budget, plan.phases
    already = evaluator.evaluations
    sizes = []
    if p == 1:
        evaluator(BudgetSplit.of(k), EXHAUSTIVE)
    elif p == 2:
        single = evaluator(BudgetSplit.of(k), DEGENERATE)
        steps = _grid_count(plan.fine_step)
        for j in range(steps + 1):
            first = int(math.floor(j * plan.fine_step * k + 1e-9))
            split = BudgetSplit.of(first, k - first)
            if first == 0 or first == k:
                means = (0.0, single.mean) if first == 0 else (single.mean, 0.0)
                evaluator.add(SearchEntry(split, single.mean, single.std, means, DEGENERATE))
            else:
                evaluator(split, EXHAUSTIVE)
    else:
        coarse = [evaluator(s, COARSE) for s in coarse_grid(plan)]
        if plan.strategy == "unimodal":
            start = min(coarse, key=lambda x: _key(x.split, x.mean)).split
            _coordinate_search(evaluator, start)
        else:
            top = sorted(coarse, key=lambda x: _key(x.split, x.mean))[: plan.top_refine]
            for entry in top:
                before = len(evaluator.memo)
                fine_neighborhood(entry.split, plan, lambda s, prov: evaluator(s, prov).mean)
                sizes.append(len(evaluator.memo) - before)
        if lower is not None:
            for entry in lower.entries:
                if entry.split.phases == p - 1 and all(a > 0 for a in entry.split.allocations):
                    for emb in _embed_lower(entry, p):
                        evaluator.add(emb)
    entries = [x for x in evaluator.entries() if x.split.phases == p or p == 1]
    means = {x.mean for x in entries}
    return SearchResult(plan, entries, evaluator.evaluations - already, flat=len(means) == 1, neighborhood_sizes=sizes)


def _coordinate_search(evaluator: SplitEvaluator, start: BudgetSplit, sweeps: int = 5):
    """Ternary search on one free coordinate at a time, the last phase absorbing changes."""
    current = start
    k = start.total
    for _ in range(sweeps):
        moved = False
        for q in range(current.phases - 1):
            free = list(current.allocations[:-1])
            rest = k - sum(free) + free[q]

            def at(x, free=free, q=q):
                cand = list(free)
                cand[q] = x
                return BudgetSplit(tuple(cand) + (k - sum(cand),))

            lo, hi = 0, rest
            while hi - lo > 2:
                m1 = lo + (hi - lo) // 3
                m2 = hi - (hi - lo) // 3
                if evaluator(at(m1), UNIMODAL).mean < evaluator(at(m2), UNIMODAL).mean:
                    lo = m1 + 1
                else:
                    hi = m2 - 1
            best = min((at(x) for x in range(lo, hi + 1)), key=lambda s: _key(s, evaluator(s, UNIMODAL).mean))
            if best != current and evaluator(best, UNIMODAL).mean > evaluator(current, UNIMODAL).mean:
                current = best
                moved = True
        if not moved:
            break
    return current


def trace_csv(result: SearchResult) -> str:
    p = result.plan.phases
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"k{q}" for q in range(1, p + 1)] + ["mean", "std", "provenance", "wall_time"]
                    + [f"beta{q}" for q in range(1, p + 1)])
    for x in result.entries:
        writer.writerow(list(x.split.allocations) + [repr(x.mean), repr(x.std), x.provenance, f"{x.wall_time:.6f}"]
                        + [repr(b) for b in x.phase_means])
    return buf.getvalue()


def read_trace_csv(text: str) -> list[SearchEntry]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        p = sum(1 for key in row if key.startswith("k") and key[1:].isdigit())
        split = BudgetSplit(tuple(int(row[f"k{q}"]) for q in range(1, p + 1)))
        betas = tuple(float(row[f"beta{q}"]) for q in range(1, p + 1))
        out.append(SearchEntry(split, float(row["mean"]), float(row["std"]), betas, row["provenance"],
                               float(row["wall_time"])))
    return out


def heatmap_csv(result: SearchResult) -> str:
    """``k1,k2,k3,mean`` rows for three-phase results, sorted by the first two coordinates."""
    if result.plan.phases != 3:
        raise ValidationError("heatmap dump is defined for three phases")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k1", "k2", "k3", "mean"])
    for x in sorted(result.entries, key=lambda x: x.split.allocations):
        writer.writerow(list(x.split.allocations) + [repr(x.mean)])
    return buf.getvalue()
