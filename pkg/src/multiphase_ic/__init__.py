"""Multiphase influence diffusion under the independent cascade model."""

from .analysis import (
    InfluenceabilityCurve,
    build_curve,
    classify_curve,
    curve_based_split,
    decay_aware_split_scan,
    decay_value,
    epsilon_from_spreads,
    min_delta,
)
from .budgetsearch import SearchPlan, SearchResult, coarse_grid, fine_neighborhood, search_optimal_split
from .errors import EnumerationLimitError, GraphFormatError, ValidationError
from .exact import exact_myopic_value, exact_optimal_seeds, exact_spread, validate_ensemble
from .graph import (
    WeightedDigraph,
    assign_trivalency,
    assign_weighted_cascade,
    load_edge_list,
    parse_edge_list,
    save_edge_list,
)
from .livegraph import LiveGraphEnsemble, advance_state, load_ensemble, sample_ensemble, save_ensemble, spread_sizes
from .multiphase import BudgetSplit, PhaseReport, run_multiphase, single_phase
from .seedselect import SelectorSpec, degree_discount, greedy_celf, irie_select, select_seeds

__version__ = "0.1.0"
