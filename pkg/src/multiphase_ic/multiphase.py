"""Myopic adaptive seeding over several phases on a shared live-graph ensemble."""

from __future__ import annotations

import csv
import io
import logging
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .graph import WeightedDigraph
from .livegraph import DiffusionState, LiveGraphEnsemble, advance_state, describe, spread_sizes
from .seedselect import SelectorSpec, select_seeds, selection_ensemble

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BudgetSplit:
    """Seeds allotted to each phase; the total budget is their sum."""

    allocations: tuple[int, ...]

    def __post_init__(self):
        allocs = tuple(int(a) for a in self.allocations)
        object.__setattr__(self, "allocations", allocs)
        if not allocs:
            raise ValidationError("a budget split needs at least one phase")
        if any(a < 0 for a in allocs):
            raise ValidationError(f"negative allocation in split {allocs}")

    @classmethod
    def of(cls, *allocations) -> "BudgetSplit":
        return cls(tuple(allocations))

    @classmethod
    def parse(cls, text: str) -> "BudgetSplit":
        try:
            return cls(tuple(int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip()))
        except ValueError:
            raise ValidationError(f"cannot parse budget split {text!r}") from None

    @property
    def total(self) -> int:
        return sum(self.allocations)

    @property
    def phases(self) -> int:
        return len(self.allocations)

    def __iter__(self):
        return iter(self.allocations)

    def __len__(self):
        return len(self.allocations)

    def __str__(self):
        return "(" + ",".join(map(str, self.allocations)) + ")"


@dataclass
class PhaseReport:
    """Cumulative influenced counts per phase and live graph, plus the seeds used.

    ``cumulative[q, i]`` is the number of nodes influenced in live graph ``i`` by
    the end of phase ``q + 1``. Later-phase seeds are stored as unique seed
    lists with an index per live graph.
    """

    split: BudgetSplit
    cumulative: np.ndarray
    first_phase_seeds: list[int]
    state_seed_sets: list[list[tuple[int, ...]]] = field(default_factory=list)
    state_seed_index: list[np.ndarray] = field(default_factory=list)
    selector_calls: int = 1
    surplus: int = 0

    @property
    def phases(self) -> int:
        return self.cumulative.shape[0]

    @property
    def incremental(self) -> np.ndarray:
        return np.diff(self.cumulative, axis=0, prepend=0)

    @property
    def final(self) -> np.ndarray:
        return self.cumulative[-1]

    @property
    def cumulative_means(self) -> np.ndarray:
        return self.cumulative.sum(axis=1) / self.cumulative.shape[1]

    @property
    def incremental_means(self) -> np.ndarray:
        """Expected number of nodes influenced during each phase."""
        return self.incremental.sum(axis=1) / self.cumulative.shape[1]

    @property
    def cumulative_stds(self) -> np.ndarray:
        return np.array([describe(row).std for row in self.cumulative])

    @property
    def incremental_stds(self) -> np.ndarray:
        return np.array([describe(row).std for row in self.incremental])

    @property
    def mean(self) -> float:
        return float(self.cumulative_means[-1])

    @property
    def std(self) -> float:
        return float(self.cumulative_stds[-1])

    def seeds_for_state(self, phase: int, i: int) -> tuple[int, ...]:
        """Seeds chosen in ``phase`` (1-based) for live graph ``i``."""
        if phase == 1:
            return tuple(self.first_phase_seeds)
        return self.state_seed_sets[phase - 2][self.state_seed_index[phase - 2][i]]

    def seed_frequency(self, phase: int, top: int = 20) -> list[tuple[int, int]]:
        """Most frequently chosen nodes in ``phase`` across live graphs."""
        if phase == 1:
            return [(v, self.cumulative.shape[1]) for v in self.first_phase_seeds][:top]
        sets = self.state_seed_sets[phase - 2]
        weights = np.bincount(self.state_seed_index[phase - 2], minlength=len(sets))
        counter = Counter()
        for seeds, w in zip(sets, weights.tolist()):
            for v in seeds:
                counter[v] += w
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:top]

    def to_dict(self, labels=None, include_state_seeds: bool = False) -> dict:
        name = (lambda v: labels[v]) if labels is not None else (lambda v: v)
        out = {
            "split": list(self.split.allocations),
            "total_budget": self.split.total,
            "live_graphs": int(self.cumulative.shape[1]),
            "mean": self.mean,
            "std": self.std,
            "phase_means": self.incremental_means.tolist(),
            "cumulative_means": self.cumulative_means.tolist(),
            "cumulative_stds": self.cumulative_stds.tolist(),
            "incremental_stds": self.incremental_stds.tolist(),
            "cumulative_histograms": [_histogram(row) for row in self.cumulative],
            "incremental_histograms": [_histogram(row) for row in self.incremental],
            "first_phase_seeds": [name(v) for v in self.first_phase_seeds],
            "seed_frequency": [
                [[name(v), c] for v, c in self.seed_frequency(q)] for q in range(2, self.phases + 1)
            ],
            "selector_calls": self.selector_calls,
            "surplus": self.surplus,
        }
        if include_state_seeds:
            out["state_seed_sets"] = [[[name(v) for v in s] for s in sets] for sets in self.state_seed_sets]
            out["state_seed_index"] = [idx.tolist() for idx in self.state_seed_index]
        return out

    def csv_row(self) -> dict:
        row = {"split": " ".join(map(str, self.split.allocations)), "final_mean": self.mean, "final_std": self.std}
        for q, (m, s) in enumerate(zip(self.incremental_means, self.incremental_stds), start=1):
            row[f"phase{q}_mean"] = m
            row[f"phase{q}_std"] = s
        return row


def _histogram(row) -> dict[str, int]:
    values, counts = np.unique(row, return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(values, counts)}


def reports_to_csv(reports) -> str:
    rows = [r.csv_row() for r in reports]
    fields = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run_multiphase(
    g: WeightedDigraph,
    e: LiveGraphEnsemble,
    split: BudgetSplit,
    spec: SelectorSpec,
    selection: LiveGraphEnsemble | None = None,
) -> PhaseReport:
    """Run ``split.phases`` phases of myopic seeding on every live graph.

    Phase one picks seeds once for the fresh graph. Each later phase picks
    seeds separately for every distinct diffusion state (live graphs with the
    same influenced set share one selector call) on the residual graph, and
    the states advance by reachability in their own live graph.
    """
    if selection is None:
        selection = selection_ensemble(g, e, spec)
    n = g.node_count
    surplus = max(0, split.total - n)
    if surplus:
        warnings.warn(f"budget {split.total} exceeds {n} nodes; the surplus of {surplus} is unusable", stacklevel=2)
    state = DiffusionState.fresh(e)
    first = select_seeds(g, selection, None, split.allocations[0], spec)
    state = advance_state(e, state, first)
    cumulative = [state.sizes()]
    seed_sets, seed_index = [], []
    calls = 1
    carry = split.allocations[0] - len(first)
    for q, k_q in enumerate(split.allocations[1:], start=2):
        budget = k_q + carry
        keys = np.packbits(state.influenced, axis=1)
        _, first_seen, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        # deterministic order: unique states in order of first appearance
        order = np.argsort(first_seen, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        sets = []
        for u in order:
            sets.append(tuple(select_seeds(g, selection, state.influenced[first_seen[u]], budget, spec)))
        calls += len(sets)
        index = rank[inverse]
        state = advance_state(e, state, [sets[index[i]] for i in range(e.count)])
        cumulative.append(state.sizes())
        seed_sets.append(sets)
        seed_index.append(index)
        log.debug("phase %d: %d distinct states", q, len(sets))
    return PhaseReport(split, np.vstack(cumulative), list(first), seed_sets, seed_index, calls, surplus)


def single_phase(g, e, budget, spec, selection=None) -> PhaseReport:
    return run_multiphase(g, e, BudgetSplit.of(budget), spec, selection)


def sigma_comparison(g, e, split: BudgetSplit, spec: SelectorSpec, report: PhaseReport | None = None, selection=None):
    """Spread of the phase-two increment versus the matching single-phase increment.

    Returns ``(sigma_p, sigma_s)``: the standard deviation of nodes influenced
    during phase two, and of ``|reach(S_{k1+k2})| - |reach(S_{k1})|`` for nested
    single-phase seed sets, both over the same live graphs.
    """
    if split.phases < 2:
        raise ValidationError("sigma comparison needs at least two phases")
    if selection is None:
        selection = selection_ensemble(g, e, spec)
    if report is None:
        report = run_multiphase(g, e, split, spec, selection)
    k1, k2 = split.allocations[:2]
    seeds = select_seeds(g, selection, None, k1 + k2, spec)
    gap = spread_sizes(e, seeds[: k1 + k2]) - spread_sizes(e, seeds[:k1])
    return float(report.incremental_stds[1]), describe(gap).std


def equal_spacing_check(report: PhaseReport) -> float:
    """Largest relative deviation of a phase's mean gain from ``final_mean / p``."""
    p = report.phases
    if p == 1:
        return 0.0
    target = report.mean / p
    if target == 0:
        return 0.0
    return float(np.max(np.abs(report.incremental_means - target)) / target)
