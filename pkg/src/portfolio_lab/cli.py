"""Command-line front end for the portfolio selection lab.

Subcommands: gen, duals, portfolio, train, eval, experiment, bounds,
lowerbound. Every run is reproducible: all randomness flows from --seed
(fallback: the PORTFOLIO_LAB_SEED environment variable, then 0) through
fixed-purpose seed sequences documented in the harness module. Exit codes:
0 success, 1 usage error, 2 domain/capacity/solver or input-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bounds import (
    UP_TO_CONSTANTS_NOTE,
    BoundQuery,
    end_to_end_bound,
    generalization_bound,
    lb_construct,
    lb_gap_experiment,
    lb_verify_shattering,
    natarajan_bound,
    pdim_upper_bound,
    verify_multiclass_shatter,
)
from .errors import CapacityError, ConsistencyError, DomainError, RangeError, SolverError
from .harness import (
    ExperimentConfig,
    export_curves,
    run_experiment_detailed,
    write_manifest,
)
from .mipbench import (
    Family,
    GeneratorSpec,
    IpInstance,
    bnb_run,
    dual_trace,
    extract_features,
    generate_instance,
)
from .mipbench.bnb import LpCache
from .piecewise import Orientation, PerformanceTable, build_table
from .portfolio import (
    SelectionMethod,
    Portfolio,
    coverage,
    exhaustive_select,
    greedy_select,
    optimality_report,
)
from .selectors import (
    ForestHyperparams,
    average_performance,
    oracle_average,
    selector_from_json,
    selector_to_json,
    train_cluster,
    train_forest,
    train_linear,
)

_USAGE_EXIT = 1
_DOMAIN_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _default_seed() -> int:
    env = os.environ.get("PORTFOLIO_LAB_SEED")
    return int(env) if env else 0


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ValueError(f"parse error in {path} at byte {e.pos}: {e.msg}") from None


def _dump_json(obj, path: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_instances(path: str) -> list[IpInstance]:
    data = _load_json(path)
    return [IpInstance.from_json(d) for d in data["instances"]]


def _seeded_rng(seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, stage)))


def build_parser() -> _Parser:
    p = _Parser(prog="portfolio-lab", description=__doc__)
    p.add_argument("--version", action="version", version=f"portfolio-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate IP instances", description="Generate set-packing winner-determination instances.")
    g.add_argument("--family", choices=["A", "B", "mix"], required=True, help="bundle family; mix flips a fair coin per instance")
    g.add_argument("--items", type=int, help="item count (families A/B; defaults per family)")
    g.add_argument("--bids", type=int, help="bid count (families A/B; defaults per family)")
    g.add_argument("--count", type=int, default=1, help="number of instances (default 1)")
    g.add_argument("--seed", type=int, default=None, help="RNG seed (default: PORTFOLIO_LAB_SEED or 0)")
    g.add_argument("--out", required=True, help="output instances JSON path")

    d = sub.add_parser("duals", help="trace dual functions and build the performance table")
    d.add_argument("--instances", required=True, help="instances JSON from 'gen'")
    d.add_argument("--node-cap", type=int, default=500, help="branch-and-bound node cap (default 500)")
    d.add_argument("--piece-cap", type=int, default=4000, help="max pieces per dual function (default 4000)")
    d.add_argument("--out", required=True, help="output duals JSON path")

    po = sub.add_parser("portfolio", help="select a portfolio from a performance table")
    po.add_argument("--table", required=True, help="duals JSON from 'duals' (or a bare table JSON)")
    po.add_argument("--kappa", type=int, required=True, help="portfolio size cap")
    po.add_argument("--method", choices=["greedy", "exhaustive"], default="greedy")
    po.add_argument("--selector-avg", type=float, default=None,
                    help="selector training average for the epsilon diagnostic (default: portfolio oracle, epsilon 0)")
    po.add_argument("--out", required=True, help="output portfolio JSON path")

    tr = sub.add_parser("train", help="train an algorithm selector")
    tr.add_argument("--instances", required=True, help="training instances JSON")
    tr.add_argument("--portfolio", required=True, help="portfolio JSON from 'portfolio'")
    tr.add_argument("--model", choices=["forest", "linear", "cluster"], default="forest")
    tr.add_argument("--node-cap", type=int, default=500, help="node cap for labeling runs (default 500)")
    tr.add_argument("--seed", type=int, default=None, help="training seed (default: PORTFOLIO_LAB_SEED or 0)")
    tr.add_argument("--trees", type=int, default=100, help="forest: tree count (default 100)")
    tr.add_argument("--max-leaves", type=int, default=64, help="forest: leaf cap per tree (default 64)")
    tr.add_argument("--min-samples-leaf", type=int, default=2, help="forest: min samples per leaf (default 2)")
    tr.add_argument("--feature-fraction", type=float, default=1.0, help="forest: feature fraction per split (default 1.0)")
    tr.add_argument("--no-bootstrap", action="store_true", help="forest: disable bootstrap resampling")
    tr.add_argument("--norm-p", type=float, default=2.0, help="cluster: inference norm p (default 2)")
    tr.add_argument("--out", required=True, help="output selector JSON path")

    ev = sub.add_parser("eval", help="evaluate a selector on train/test instance sets")
    ev.add_argument("--selector", required=True, help="selector JSON from 'train'")
    ev.add_argument("--train-instances", required=True, help="training instances JSON")
    ev.add_argument("--test-instances", required=True, help="test instances JSON")
    ev.add_argument("--node-cap", type=int, default=500, help="node cap for labeling runs (default 500)")
    ev.add_argument("--out", default=None, help="output metrics JSON path (default stdout)")

    ex = sub.add_parser("experiment", help="run the overfitting-tradeoff experiment")
    ex.add_argument("--config", default=None, help="experiment config JSON (default: built-in desk config)")
    ex.add_argument("--seed", type=int, default=None, help="override the config seed")
    ex.add_argument("--out-prefix", required=True, help="output prefix for .csv/.svg/.manifest.json")
    ex.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                    help="worker processes for tracing/labeling (default: logical cores)")

    bo = sub.add_parser("bounds", help="evaluate the sample-complexity bound formulas")
    bo.add_argument("--dbar", type=int, required=True, help="Natarajan dimension of the selector class")
    bo.add_argument("--kappa", type=int, required=True, help="portfolio size")
    bo.add_argument("--t", type=int, required=True, help="max pieces per dual function")
    bo.add_argument("--N", type=int, required=True, help="training-set size")
    bo.add_argument("--H", type=float, required=True, help="utility range cap")
    bo.add_argument("--delta", type=float, required=True, help="confidence parameter in (0,1)")
    bo.add_argument("--alpha", type=float, default=1.0, help="portfolio quality factor (default 1)")
    bo.add_argument("--beta", type=float, default=0.0, help="portfolio additive slack (default 0)")
    bo.add_argument("--epsilon", type=float, default=0.0, help="selector-vs-oracle slack (default 0)")
    bo.add_argument("--selector-class", choices=["linear", "tree", "cluster"], default=None,
                    help="also report the class's Natarajan-dimension formula")
    bo.add_argument("--m", type=int, default=None, help="feature dimension for --selector-class")
    bo.add_argument("--ell", type=int, default=1, help="leaf cap for --selector-class tree")
    bo.add_argument("--p", type=float, default=2.0, help="norm for --selector-class cluster")
    bo.add_argument("--out", default=None, help="output JSON path (default stdout)")

    lb = sub.add_parser("lowerbound", help="lower-bound family: shattering verdicts and gap curves")
    lb.add_argument("--kappa", type=int, required=True, help="interval count (>= 2)")
    lb.add_argument("--verify", action="store_true", help="verify pseudo-dimension shattering by enumeration")
    lb.add_argument("--gap-N", type=int, nargs="*", default=[], help="sample sizes for the ERM gap experiment")
    lb.add_argument("--trials", type=int, default=10000, help="Monte Carlo trials per N (default 10000)")
    lb.add_argument("--seed", type=int, default=None, help="RNG seed (default: PORTFOLIO_LAB_SEED or 0)")
    lb.add_argument("--out", default=None, help="verdict JSON path (default stdout)")
    lb.add_argument("--gap-csv", default=None, help="CSV path for gap results (kappa,N,trials,mean_gap)")
    return p


def _cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    rng = _seeded_rng(seed, 0)
    defaults = {Family.A: (15, 30), Family.B: (20, 40)}
    instances = []
    for _ in range(args.count):
        if args.family == "mix":
            fam = Family.A if rng.integers(0, 2) == 0 else Family.B
        else:
            fam = Family(args.family)
        items, bids = defaults[fam]
        items = args.items if args.items is not None else items
        bids = args.bids if args.bids is not None else bids
        child = int(rng.integers(0, 2**63 - 1))
        instances.append(generate_instance(GeneratorSpec(fam, items, bids, child)))
    _dump_json({"version": "v1", "seed": seed, "instances": [z.to_json() for z in instances]}, args.out)
    return 0


def _cmd_duals(args) -> int:
    instances = _load_instances(args.instances)
    if not instances:
        raise ValueError("no instances in input file")
    functions = [dual_trace(z, args.node_cap, args.piece_cap) for z in instances]
    table = build_table(functions, Orientation.MINIMIZE, float(args.node_cap))
    _dump_json(
        {
            "version": "v1",
            "node_cap": args.node_cap,
            "functions": [
                {"fn": f.to_json(), "capped_pieces": list(f.piece_capped or [])}
                for f in functions
            ],
            "table": table.to_json(),
        },
        args.out,
    )
    return 0


def _cmd_portfolio(args) -> int:
    data = _load_json(args.table)
    table = PerformanceTable.from_json(data["table"] if "table" in data else data)
    if args.method == "greedy":
        portfolio, gains = greedy_select(table, args.kappa)
        method = SelectionMethod.GREEDY
    else:
        portfolio = exhaustive_select(table, args.kappa)
        gains = []
        method = SelectionMethod.EXHAUSTIVE
    oracle_avg = coverage(table, portfolio) / table.n_instances
    selector_avg = args.selector_avg if args.selector_avg is not None else oracle_avg
    report = optimality_report(table, portfolio, selector_avg, method)
    _dump_json(
        {
            "version": "v1",
            "portfolio": portfolio.to_json(),
            "method": method.value,
            "greedy_gains": [float(g) for g in gains],
            "report": report.to_json(),
        },
        args.out,
    )
    return 0


def _label_instances(instances, params, node_cap):
    features, labels = [], []
    for z in instances:
        cache = LpCache(z)
        features.append(extract_features(z))
        labels.append([bnb_run(z, rho, node_cap, cache=cache).tree_size for rho in params])
    return np.array(features), np.array(labels, dtype=float)


def _cmd_train(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    instances = _load_instances(args.instances)
    pdata = _load_json(args.portfolio)
    portfolio = Portfolio.from_json(pdata["portfolio"] if "portfolio" in pdata else pdata)
    X, labels = _label_instances(instances, portfolio.params, args.node_cap)
    from .piecewise import CandidateSet

    table = PerformanceTable(
        utilities=labels,
        candidates=CandidateSet(portfolio.params, len(portfolio.params)),
        orientation=Orientation.MINIMIZE,
        range_cap=float(args.node_cap),
    )
    if args.model == "forest":
        hp = ForestHyperparams(
            n_trees=args.trees,
            max_leaves=args.max_leaves,
            min_samples_leaf=args.min_samples_leaf,
            feature_fraction=args.feature_fraction,
            bootstrap=not args.no_bootstrap,
        )
        selector = train_forest(X, table, portfolio, hp, seed=seed)
    elif args.model == "linear":
        selector = train_linear(X, table, portfolio)
    else:
        selector = train_cluster(X, table, portfolio, norm_p=args.norm_p, seed=seed)
    _dump_json(selector_to_json(selector), args.out)
    return 0


def _cmd_eval(args) -> int:
    selector = selector_from_json(_load_json(args.selector))
    train = _load_instances(args.train_instances)
    test = _load_instances(args.test_instances)
    params = selector.portfolio.params
    X_train, y_train = _label_instances(train, params, args.node_cap)
    X_test, y_test = _label_instances(test, params, args.node_cap)
    train_avg = average_performance(selector, X_train, y_train)
    test_avg = average_performance(selector, X_test, y_test)
    oracle_train = oracle_average(y_train, selector.orientation)
    epsilon = train_avg - oracle_train if selector.orientation is Orientation.MINIMIZE else oracle_train - train_avg
    _dump_json(
        {
            "version": "v1",
            "train_avg": train_avg,
            "test_avg": test_avg,
            "oracle_train_avg": oracle_train,
            "epsilon": epsilon,
            "gap": abs(train_avg - test_avg),
        },
        args.out,
    )
    return 0


def _cmd_experiment(args) -> int:
    if args.config is not None:
        config = ExperimentConfig.from_json(_load_json(args.config))
    else:
        config = ExperimentConfig()
    if args.seed is not None:
        config = ExperimentConfig.from_json({**config.to_json(), "seed": args.seed})
    t0 = time.time()
    result = run_experiment_detailed(config, jobs=max(1, args.jobs))
    elapsed = time.time() - t0
    csv_path, svg_path = export_curves(result.points, args.out_prefix)
    write_manifest(
        f"{args.out_prefix}.manifest.json",
        config,
        timings={"total_seconds": elapsed},
        extra={
            "greedy_params": [float(p) for p in result.greedy_params],
            "greedy_gains": [float(g) for g in result.greedy_gains],
            "warnings": list(result.warnings),
        },
    )
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {csv_path}, {svg_path}, {args.out_prefix}.manifest.json")
    return 0


def _cmd_bounds(args) -> int:
    q = BoundQuery(
        d_bar=args.dbar,
        kappa=args.kappa,
        t=args.t,
        N=args.N,
        H=args.H,
        delta=args.delta,
        alpha=args.alpha,
        beta=args.beta,
        epsilon=args.epsilon,
    )
    pdim = pdim_upper_bound(q)
    reports = [
        {"bound_name": "pdim_upper_bound", "inputs": q.to_json(), "value": pdim, "note": UP_TO_CONSTANTS_NOTE},
        {
            "bound_name": "generalization_bound",
            "inputs": q.to_json(),
            "value": generalization_bound(q, pdim),
            "note": UP_TO_CONSTANTS_NOTE,
        },
        {
            "bound_name": "end_to_end_slack",
            "inputs": q.to_json(),
            "value": end_to_end_bound(q),
            "note": UP_TO_CONSTANTS_NOTE,
        },
    ]
    if args.selector_class is not None:
        if args.m is None:
            raise ValueError("--m is required with --selector-class")
        reports.append(
            {
                "bound_name": f"natarajan_{args.selector_class}",
                "inputs": {"m": args.m, "kappa": args.kappa, "ell": args.ell, "p": args.p},
                "value": natarajan_bound(args.selector_class, args.m, args.kappa, args.ell, args.p),
                "note": UP_TO_CONSTANTS_NOTE,
            }
        )
    _dump_json({"version": "v1", "bounds": reports}, args.out)
    return 0


def _cmd_lowerbound(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    family = lb_construct(args.kappa)
    out = {"version": "v1", "kappa": args.kappa, "shattered_set": list(family.shattered_set)}
    if args.verify:
        out["shattering_verified"] = lb_verify_shattering(family)
        out["multiclass_projection_shatters_d1"] = verify_multiclass_shatter(
            family.multiclass_projection(), family.shattered_set, 1
        )
    rows = []
    for N in args.gap_N:
        gap = lb_gap_experiment(args.kappa, N, args.trials, seed)
        rows.append((args.kappa, N, args.trials, gap))
    if rows:
        out["gap_results"] = [
            {"kappa": k, "N": n, "trials": t, "mean_gap": g} for k, n, t, g in rows
        ]
    if args.gap_csv is not None:
        with open(args.gap_csv, "w") as fh:
            fh.write("kappa,N,trials,mean_gap\n")
            for k, n, t, g in rows:
                fh.write(f"{k},{n},{t},{g!r}\n")
    _dump_json(out, args.out)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "duals": _cmd_duals,
    "portfolio": _cmd_portfolio,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "experiment": _cmd_experiment,
    "bounds": _cmd_bounds,
    "lowerbound": _cmd_lowerbound,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, DomainError, RangeError, CapacityError, SolverError, ConsistencyError, OSError) as e:
        print(f"portfolio-lab {args.command}: error: {e}", file=sys.stderr)
        return _DOMAIN_EXIT


if __name__ == "__main__":
    sys.exit(main())
