"""Influenceability curves, curve-derived budget splits and phase-decay analysis."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ValidationError
from .graph import WeightedDigraph
from .livegraph import DiffusionState, LiveGraphEnsemble, advance_state
from .multiphase import BudgetSplit, PhaseReport
from .seedselect import SelectorSpec, select_seeds, selection_ensemble

LINEAR = "linear"
RISE_AND_FLAT = "rise-and-flat"
VERY_CONCAVE = "very-concave"
LESS_CONCAVE = "less-concave"


@dataclass(frozen=True)
class InfluenceabilityCurve:
    """Mean spread ``spreads[b]`` of the first ``b`` seeds for ``b = 0..k``."""

    spreads: np.ndarray
    selector: str = ""
    ensemble: str = ""
    seeds: tuple[int, ...] = ()

    def __post_init__(self):
        s = np.asarray(self.spreads, dtype=float)
        if s.ndim != 1 or len(s) < 1:
            raise ValidationError("a curve needs at least the point b = 0")
        object.__setattr__(self, "spreads", s)

    @property
    def max_budget(self) -> int:
        return len(self.spreads) - 1

    @property
    def budgets(self) -> np.ndarray:
        return np.arange(len(self.spreads))

    def at(self, b: float) -> float:
        """Spread at a possibly fractional budget, by linear interpolation."""
        return float(np.interp(b, self.budgets, self.spreads))

    def inverse(self, level: float) -> float:
        """Smallest budget at which the interpolated curve reaches ``level``."""
        s = self.spreads
        hit = np.flatnonzero(s >= level - 1e-12)
        if len(hit) == 0:
            return float(self.max_budget)
        i = int(hit[0])
        if i == 0:
            return 0.0
        lo, hi = s[i - 1], s[i]
        return (i - 1) + (level - lo) / (hi - lo)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["budget", "spread"])
        for b, f in enumerate(self.spreads.tolist()):
            writer.writerow([b, repr(f)])
        return buf.getvalue()


def build_curve(g: WeightedDigraph, e: LiveGraphEnsemble, max_budget: int, spec: SelectorSpec) -> InfluenceabilityCurve:
    """Curve from the prefixes of one selector run of size ``max_budget``."""
    if max_budget < 0:
        raise ValidationError("max_budget must be non-negative")
    seeds = select_seeds(g, selection_ensemble(g, e, spec), None, max_budget, spec)
    state = DiffusionState.fresh(e)
    spreads = [0.0]
    for v in seeds:
        state = advance_state(e, state, [v])
        spreads.append(float(state.sizes().sum()) / e.count)
    # a budget larger than the node count adds nothing
    spreads += [spreads[-1]] * (max_budget - len(seeds))
    return InfluenceabilityCurve(np.array(spreads), spec.kind, e.fingerprint, tuple(seeds))


@dataclass(frozen=True)
class CurveThresholds:
    linear_band: float = 0.05
    rise_ratio: float = 0.8
    rise_fraction: float = 0.1
    concave_area: float = 0.75


def curve_area(c: InfluenceabilityCurve) -> float:
    """Area under the curve rescaled to the unit square."""
    k, top = c.max_budget, c.spreads[-1]
    if k == 0 or top <= 0:
        return 0.0
    y = c.spreads / top
    return float(np.sum((y[1:] + y[:-1]) / 2) / k)


def classify_curve(c: InfluenceabilityCurve, thresholds: CurveThresholds = CurveThresholds()) -> str:
    if len(c.spreads) < 3:
        raise ValidationError("classification needs at least three points")
    top = c.spreads[-1]
    if top <= 0:
        warnings.warn("flat zero curve classified as linear", stacklevel=2)
        return LINEAR
    area = curve_area(c)
    if abs(area - 0.5) <= thresholds.linear_band:
        return LINEAR
    if c.at(thresholds.rise_fraction * c.max_budget) / top >= thresholds.rise_ratio:
        return RISE_AND_FLAT
    if area >= thresholds.concave_area:
        return VERY_CONCAVE
    return LESS_CONCAVE


def curve_based_split(c: InfluenceabilityCurve, phases: int, kind: str | None = None) -> BudgetSplit:
    """Split whose phases each cover an equal share of the spread on the curve.

    The budget where the curve reaches ``j * f(k) / p`` is floored to give the
    cumulative allocation after phase ``j``; the terminal phase takes the rest.
    Rise-and-flat curves get one seed per non-terminal phase.
    """
    if phases < 1:
        raise ValidationError("phases must be at least 1")
    if np.any(np.diff(c.spreads) < -1e-9):
        raise ValidationError("curve must be non-decreasing")
    k = c.max_budget
    if kind is None and len(c.spreads) >= 3:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kind = classify_curve(c)
    if kind == RISE_AND_FLAT and k >= phases:
        return BudgetSplit((1,) * (phases - 1) + (k - phases + 1,))
    top = c.spreads[-1]
    marks = [0]
    for j in range(1, phases):
        x = int(math.floor(c.inverse(j * top / phases) + 1e-9))
        marks.append(min(max(x, marks[-1]), k))
    marks.append(k)
    return BudgetSplit(tuple(b - a for a, b in zip(marks, marks[1:])))


def _betas(source) -> np.ndarray:
    if isinstance(source, PhaseReport):
        return source.incremental_means
    return np.asarray(source, dtype=float)


def _check_delta(delta):
    if not 0.0 <= delta <= 1.0:
        raise ValidationError(f"decay factor must lie in [0, 1], got {delta}")


def decay_value(source, delta: float) -> float:
    """``sum_q delta**q * beta_q`` with phases counted from 1."""
    _check_delta(delta)
    betas = _betas(source)
    return math.fsum(delta ** q * b for q, b in enumerate(betas.tolist(), start=1))


def epsilon_from_spreads(single: float, multi: float) -> float:
    """Relative gain of the multi-phase spread over the single-phase spread."""
    if multi <= 0:
        raise ValidationError("multi-phase spread must be positive")
    return (multi - single) / multi


class DeltaBound(NamedTuple):
    delta: float
    advantageous: bool


def min_delta(phases: int, epsilon: float, tol: float = 1e-6) -> DeltaBound:
    """Smallest ``delta`` in [0, 1] with ``delta**p - p*delta + (p - 1 - epsilon) <= 0``.

    The left side decreases on [0, 1], so bisection finds the unique root.
    With no spread gain (``epsilon <= 0``) phases never pay off and the bound is 1.
    """
    if phases < 2:
        raise ValidationError("the decay bound needs at least two phases")
    if epsilon >= 1:
        raise ValidationError("epsilon must be below 1")
    if epsilon <= 0:
        return DeltaBound(1.0, False)

    def h(d):
        return d**phases - phases * d + (phases - 1 - epsilon)

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if h(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return DeltaBound(hi, True)


@dataclass(frozen=True)
class DecayAnalysis:
    delta: float
    betas: tuple[float, ...]
    value: float
    epsilon: float
    min_delta: float
    advantageous: bool

    @property
    def phases(self) -> int:
        return len(self.betas)


def analyse_decay(source, delta: float, single_spread: float) -> DecayAnalysis:
    """Decayed value of a multi-phase outcome and the break-even decay factor."""
    betas = _betas(source)
    eps = epsilon_from_spreads(single_spread, float(betas.sum()))
    bound = min_delta(len(betas), eps) if len(betas) >= 2 else DeltaBound(1.0, False)
    return DecayAnalysis(delta, tuple(betas.tolist()), decay_value(betas, delta), eps, bound.delta, bound.advantageous)


@dataclass
class DecayScan:
    delta: float
    ranking: list  # (value, entry) pairs, best first
    proportional: bool
    deviation: float

    @property
    def best(self):
        return self.ranking[0][1]

    @property
    def best_value(self) -> float:
        return self.ranking[0][0]


def decay_aware_split_scan(entries, delta: float, tolerance: float = 0.2) -> DecayScan:
    """Rank searched splits by decayed value.

    ``entries`` need ``split`` and ``phase_means``. The winner is checked for
    per-phase gains roughly following ``delta**q``: ``deviation`` is the largest
    relative gap between ``beta_q / beta_1`` and ``delta**(q-1)``.
    """
    _check_delta(delta)
    entries = list(entries)
    if not entries:
        raise ValidationError("nothing to rank")
    scored = [(decay_value(x.phase_means, delta), x) for x in entries]
    scored.sort(key=lambda vx: (-vx[0], vx[1].split.allocations))
    betas = np.asarray(scored[0][1].phase_means, dtype=float)
    if len(betas) < 2 or betas[0] <= 0:
        deviation = 0.0
    else:
        expected = delta ** np.arange(len(betas))
        ratio = betas / betas[0]
        deviation = float(np.max(np.abs(ratio - expected) / np.maximum(expected, 1e-12)))
    return DecayScan(delta, scored, deviation <= tolerance, deviation)
