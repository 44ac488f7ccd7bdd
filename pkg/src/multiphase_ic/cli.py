"""Command-line front end.

Every command prints a JSON summary (sorted keys, no timings) on stdout and
writes CSV artifacts to the output directory. Wall-clock timings go to stderr.
Exit codes: 0 success, 1 invalid input, 2 enumeration refused, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, budgetsearch, exact
from .config import RunConfig
from .errors import EnumerationLimitError, GraphFormatError, ValidationError
from .graph import assign_trivalency, assign_weighted_cascade, load_edge_list, parse_edge_list
from .livegraph import (
    describe,
    load_ensemble,
    sample_ensemble,
    save_ensemble,
    simulate_cascade,
    spread_sizes,
)
from .multiphase import BudgetSplit, reports_to_csv, run_multiphase
from .seedselect import SelectorSpec, select_seeds, selection_ensemble

OUTPUT_ENV = "MPIC_OUTPUT_DIR"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_REFUSED = 2
EXIT_IO = 3


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def fixture_text() -> str:
    """Edge list of the bundled five-node example graph."""
    return resources.files("multiphase_ic").joinpath("data/five_node.txt").read_text()


# ---------------------------------------------------------------- plumbing


class Run:
    """Resolved config plus lazily loaded graph and ensemble."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._graph = None
        self._ensemble = None
        self.out = Path(config.output_dir)

    @property
    def spec(self) -> SelectorSpec:
        c = self.config
        return SelectorSpec(c.selector, c.irie_alpha, c.irie_iterations, c.convergence_tol, c.selection_samples)

    @property
    def graph(self):
        if self._graph is None:
            c = self.config
            if c.graph is None:
                raise UsageError("no graph given (use --graph or the 'graph' config key)")
            g = load_edge_list(c.graph, undirected=c.undirected, id_map=c.id_map)
            if c.prob_model == "wc":
                g = assign_weighted_cascade(g)
            elif c.prob_model == "tv":
                g = assign_trivalency(g, c.prob_seed)
            elif not g.has_probabilities:
                raise ValidationError("prob_model 'file' needs a probability on every edge line")
            self._graph = g
        return self._graph

    @property
    def ensemble(self):
        if self._ensemble is None:
            c = self.config
            start = time.perf_counter()
            if c.ensemble is not None and Path(c.ensemble).exists():
                self._ensemble = load_ensemble(c.ensemble, self.graph)
            else:
                self._ensemble = sample_ensemble(self.graph, c.samples, c.seed)
            _timing("ensemble", time.perf_counter() - start)
        return self._ensemble

    def budget(self) -> int:
        if self.config.budget is None:
            raise UsageError("this command needs --budget")
        return self.config.budget

    def write(self, name: str, text: str) -> str:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        return name

    def labels(self, nodes):
        return [self.graph.labels[v] for v in nodes]


def _timing(what, seconds):
    print(f"[time] {what}: {seconds:.3f}s", file=sys.stderr)


def _histogram_csv(columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "size", "count"])
    for name, sizes in columns.items():
        values, counts = np.unique(np.asarray(sizes), return_counts=True)
        for v, c in zip(values.tolist(), counts.tolist()):
            writer.writerow([name, v, c])
    return buf.getvalue()


def _parse_seeds(run: Run) -> list[int]:
    return [run.graph.node_id(x.strip()) for x in run.config.seeds.split(",") if x.strip()]


# ---------------------------------------------------------------- commands


def cmd_sample(run: Run) -> dict:
    c = run.config
    start = time.perf_counter()
    e = sample_ensemble(run.graph, c.samples, c.seed)
    _timing("sampling", time.perf_counter() - start)
    path = Path(c.ensemble) if c.ensemble else run.out / "ensemble.bin"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_ensemble(e, path)
    return {
        "command": "sample",
        "samples": e.count,
        "seed": e.master_seed,
        "nodes": run.graph.node_count,
        "edges": run.graph.edge_count,
        "ensemble_file": str(path),
        "sha256": hashlib.sha256(path.read_bytes()).hexdigest(),
    }


def cmd_spread(run: Run) -> dict:
    c = run.config
    g = run.graph
    if c.seeds is not None:
        seeds = _parse_seeds(run)
    elif c.exact:
        seeds = sorted(exact.exact_optimal_seeds(g, run.budget())[0])
    else:
        seeds = select_seeds(g, selection_ensemble(g, run.ensemble, run.spec), None, run.budget(), run.spec)
    out = {"command": "spread", "seeds": run.labels(seeds)}
    if c.exact:
        out["exact_spread"] = exact.exact_spread(g, seeds)
        return out
    dist = describe(spread_sizes(run.ensemble, seeds))
    out.update(mean=dist.mean, std=dist.std, samples=run.ensemble.count,
               histogram={str(k): v for k, v in dist.histogram.items()})
    out["artifacts"] = [run.write("spread-histogram.csv", _histogram_csv({"spread": dist.sizes}))]
    return out


def _split_for(run: Run) -> BudgetSplit:
    c = run.config
    if c.split is None:
        raise UsageError("this command needs --split")
    split = BudgetSplit.parse(c.split)
    if c.budget is not None and split.total != c.budget:
        raise UsageError(f"split {split} sums to {split.total}, not the budget {c.budget}")
    return split


def cmd_multiphase(run: Run) -> dict:
    split = _split_for(run)
    g = run.graph
    if run.config.exact:
        return {"command": "multiphase", "split": list(split.allocations),
                "exact_value": exact.exact_myopic_value(g, split)}
    start = time.perf_counter()
    report = run_multiphase(g, run.ensemble, split, run.spec)
    _timing("multiphase", time.perf_counter() - start)
    out = {"command": "multiphase", **report.to_dict(labels=g.labels)}
    hist = {f"cumulative{q + 1}": row for q, row in enumerate(report.cumulative)}
    hist.update({f"phase{q + 1}": row for q, row in enumerate(report.incremental)})
    out["artifacts"] = [
        run.write("multiphase-summary.csv", reports_to_csv([report])),
        run.write("multiphase-histograms.csv", _histogram_csv(hist)),
    ]
    return out


def _plan(run: Run, phases: int) -> budgetsearch.SearchPlan:
    c = run.config
    return budgetsearch.SearchPlan(run.budget(), phases, c.coarse_step, c.fine_step, c.top_refine, c.strategy)


def _searches(run: Run, max_phases: int) -> list[budgetsearch.SearchResult]:
    g, e, spec = run.graph, run.ensemble, run.spec
    selection = selection_ensemble(g, e, spec)
    evaluator = budgetsearch.SplitEvaluator(lambda s: run_multiphase(g, e, s, spec, selection))
    results, lower = [], None
    for p in range(2, max_phases + 1):
        start = time.perf_counter()
        lower = budgetsearch.search_optimal_split(g, e, _plan(run, p), spec, lower=lower, evaluator=evaluator)
        _timing(f"search p={p}", time.perf_counter() - start)
        results.append(lower)
    return results


def cmd_search(run: Run) -> dict:
    c = run.config
    if c.phases < 2:
        raise UsageError("search needs at least two phases")
    run.budget()
    results = _searches(run, c.phases)
    artifacts = []
    for r in results:
        p = r.plan.phases
        artifacts.append(run.write(f"search-trace-p{p}.csv", budgetsearch.trace_csv(r)))
        if p == 3:
            artifacts.append(run.write("search-heatmap-p3.csv", budgetsearch.heatmap_csv(r)))
    return {
        "command": "search",
        "results": [r.to_dict() for r in results],
        "artifacts": artifacts,
    }


def cmd_curve(run: Run) -> dict:
    c = run.config
    curve = analysis.build_curve(run.graph, run.ensemble, run.budget(), run.spec)
    kind = analysis.classify_curve(curve) if curve.max_budget >= 2 else None
    split = analysis.curve_based_split(curve, c.phases, kind)
    return {
        "command": "curve",
        "spreads": curve.spreads.tolist(),
        "seeds": run.labels(curve.seeds),
        "area": analysis.curve_area(curve),
        "classification": kind,
        "phases": c.phases,
        "curve_split": list(split.allocations),
        "artifacts": [run.write("curve.csv", curve.to_csv())],
    }


def cmd_decay(run: Run) -> dict:
    c = run.config
    deltas = c.delta_grid()
    for d in deltas:
        if not 0 <= d <= 1:
            raise UsageError(f"decay factor {d} outside [0, 1]")
    spreads = c.spread_list()
    out = {"command": "decay", "deltas": deltas}
    if spreads is not None:
        if len(spreads) < 2:
            raise UsageError("--spreads needs the single-phase spread and at least one multi-phase spread")
        out["min_delta"] = _bounds(spreads)
        return out
    if c.phases < 2:
        raise UsageError("decay analysis needs at least two phases")
    results = _searches(run, c.phases)
    single = next(x.mean for x in results[0].entries if 0 in x.split.allocations)
    best = [single] + [r.best.mean for r in results]
    out["best_spreads"] = best
    out["min_delta"] = _bounds(best)
    scans = []
    for r in results:
        for d in deltas:
            scan = analysis.decay_aware_split_scan(r.entries, d)
            scans.append({
                "phases": r.plan.phases, "delta": d, "best_split": list(scan.best.split.allocations),
                "value": scan.best_value, "proportional": scan.proportional, "deviation": scan.deviation,
            })
    out["scans"] = scans
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phases", "delta", "best_split", "value"])
    for s in scans:
        writer.writerow([s["phases"], s["delta"], " ".join(map(str, s["best_split"])), repr(s["value"])])
    out["artifacts"] = [run.write("decay-scan.csv", buf.getvalue())]
    return out


def _bounds(spreads):
    rows = []
    for p, multi in enumerate(spreads[1:], start=2):
        eps = analysis.epsilon_from_spreads(spreads[0], multi)
        bound = analysis.min_delta(p, eps)
        rows.append({"phases": p, "epsilon": eps, "min_delta": bound.delta, "advantageous": bound.advantageous})
    return rows


def cmd_verify(run: Run) -> dict:
    """Regression checks on the bundled five-node graph plus oracle cross-checks."""
    c = run.config
    g = parse_edge_list(fixture_text())
    checks = []

    def check(name, ok, **details):
        checks.append({"name": name, "passed": bool(ok), **details})

    seeds, value = exact.exact_optimal_seeds(g, 2)
    check("optimal two seeds", sorted(g.labels[v] for v in seeds) == ["A", "B"] and abs(value - 4.25) <= 1e-9,
          seeds=sorted(g.labels[v] for v in seeds), value=value)
    myopic = exact.exact_myopic_value(g, [1, 1])
    check("myopic one plus one", abs(myopic - 4.0) <= 1e-9, value=myopic)
    total = exact.total_probability(g)
    check("live-graph probabilities sum to one", abs(total - 1.0) <= 1e-12, value=total)

    e = sample_ensemble(g, max(c.samples, 2000), c.seed)
    mc = exact.validate_ensemble(g, e, seeds)
    check("ensemble mean matches exact spread", mc.z_score < 4, mean=mc.mc_mean, exact=mc.exact, z=mc.z_score)
    coupled = all(simulate_cascade(g, [s], coins=e.presence(i)) == e.reach(i, [s])
                  for i in range(min(e.count, 200)) for s in range(g.node_count))
    check("step simulation equals live-graph reachability", coupled)
    report = run_multiphase(g, e, BudgetSplit.of(1, 1), SelectorSpec())
    check("two single-seed phases on the ensemble", report.mean == 4.0, value=report.mean)
    return {"command": "verify", "checks": checks, "passed": all(x["passed"] for x in checks)}


COMMANDS = {
    "sample": cmd_sample,
    "spread": cmd_spread,
    "multiphase": cmd_multiphase,
    "search": cmd_search,
    "curve": cmd_curve,
    "decay": cmd_decay,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------- arguments


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="key = value config file; flags override it")
    common.add_argument("--graph", default=S, help="edge list: 'u v' or 'u v p' per line")
    common.add_argument("--undirected", action="store_const", const=True, default=S)
    common.add_argument("--id-map", dest="id_map", default=S)
    common.add_argument("--prob-model", dest="prob_model", choices=("wc", "tv", "file"), default=S)
    common.add_argument("--prob-seed", dest="prob_seed", type=int, default=S)
    common.add_argument("-M", "--samples", type=int, default=S, help="number of live graphs")
    common.add_argument("--seed", type=int, default=S, help="ensemble master seed")
    common.add_argument("--ensemble", default=S, help="ensemble file to load (or write, for 'sample')")
    common.add_argument("--selector", choices=("live-graph-greedy", "degree-discount", "irie"), default=S)
    common.add_argument("--selection-samples", dest="selection_samples", type=int, default=S,
                        help="greedy estimates gains on a separate ensemble of this size")
    common.add_argument("--irie-alpha", dest="irie_alpha", type=float, default=S)
    common.add_argument("--output-dir", dest="output_dir", default=S)
    common.add_argument("--workers", type=int, default=S, help="kernel threads (0 = all cores)")

    parser = _Parser(prog="mpic", description="Multiphase influence diffusion under independent cascade.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("sample", parents=[common], help="sample and store a live-graph ensemble")
    p = sub.add_parser("spread", parents=[common], help="spread of explicit or selected seeds")
    p.add_argument("--seeds", default=S, help="comma-separated node labels")
    p.add_argument("--budget", type=int, default=S)
    p.add_argument("--exact", action="store_const", const=True, default=S)
    p = sub.add_parser("multiphase", parents=[common], help="run one budget split")
    p.add_argument("--split", default=S, help="allocations, e.g. 5,15")
    p.add_argument("--budget", type=int, default=S)
    p.add_argument("--exact", action="store_const", const=True, default=S)
    p = sub.add_parser("search", parents=[common], help="search budget splits")
    p.add_argument("--budget", type=int, default=S)
    p.add_argument("--phases", type=int, default=S)
    p.add_argument("--coarse-step", dest="coarse_step", type=float, default=S)
    p.add_argument("--fine-step", dest="fine_step", type=float, default=S)
    p.add_argument("--top-refine", dest="top_refine", type=int, default=S)
    p.add_argument("--strategy", choices=("grid", "unimodal"), default=S)
    p = sub.add_parser("curve", parents=[common], help="influenceability curve and curve-based split")
    p.add_argument("--budget", type=int, default=S)
    p.add_argument("--phases", type=int, default=S)
    p = sub.add_parser("decay", parents=[common], help="decay-factor analysis")
    p.add_argument("--deltas", default=S, help="comma-separated decay factors")
    p.add_argument("--spreads", default=S, help="single-phase spread followed by best p-phase spreads")
    p.add_argument("--budget", type=int, default=S)
    p.add_argument("--phases", type=int, default=S)
    sub.add_parser("verify", parents=[common], help="regression and oracle self-checks")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = dict(vars(args))
    values.pop("command", None)
    path = values.pop("config", None)
    config = RunConfig.load(path) if path else RunConfig()
    env = os.environ.get(OUTPUT_ENV)
    if env and "output_dir" not in values:
        values["output_dir"] = env
    return config.updated(values).validate()


def _set_workers(n: int):
    import numba

    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(min(n, limit) if n > 0 else limit)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        _set_workers(config.workers)
        run = Run(config)
        start = time.perf_counter()
        summary = COMMANDS[args.command](run)
        _timing(args.command, time.perf_counter() - start)
    except EnumerationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValidationError, GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(summary, sort_keys=True, indent=2, default=_json_default))
    if args.command == "verify" and not summary["passed"]:
        return EXIT_INVALID
    return EXIT_OK


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


if __name__ == "__main__":
    sys.exit(main())
