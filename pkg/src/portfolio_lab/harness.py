"""End-to-end overfitting-tradeoff experiment at desk scale.

Pipeline: draw instances from the two-family mixture, trace exact dual
functions, build the minimize-oriented performance table, greedily pick a
portfolio, then for each training-set size and replication draw fresh
train/test sets, label them by branch-and-bound tree size at every portfolio
parameter, train one performance model per parameter, and evaluate the prefix
selectors f_kappa = argmin over the first kappa greedy picks. Curves report
test/train/oracle averages normalized by their kappa = 1 values.

All randomness flows from the config seed through fixed-purpose seed
sequences: (seed, 0) draws the dual-function instances, (seed, 1, s, r) and
(seed, 2, s, r) draw the train and test sets for size index s and replication
r, and (seed, 3, s, r) seeds selector training. Prefix selectors break score
ties toward the earlier greedy pick. Results are independent of the worker
count: labeling tasks are pure functions gathered in submission order.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .mipbench import Family, bnb_run, dual_trace, extract_features, sample_mixed_instances
from .mipbench.bnb import LpCache
from .piecewise import Orientation, build_table
from .portfolio import greedy_order
from .selectors import ForestHyperparams, fit_forest, fit_linear, forest_predict, linear_predict

CONFIG_VERSION = "v1"
CSV_HEADER = "train_size,replication,kappa,test_ratio,train_ratio,oracle_ratio"


@dataclass(frozen=True)
class ExperimentConfig:
    """Desk-scale defaults: one greedy pass over 1000 dual instances sustains a
    full 15-entry portfolio, and a single training size keeps the seeded
    default run in the minutes range on two cores; pass ``train_sizes`` with
    several values to sweep the training-set size as well."""

    seed: int = 7
    n_dual_instances: int = 1000
    train_sizes: tuple[int, ...] = (30,)
    test_size: int = 500
    kappa_max: int = 15
    selector_kind: str = "forest"  # "forest" or "linear"
    forest_hyperparams: ForestHyperparams = field(default_factory=ForestHyperparams)
    generator_sizes: tuple[tuple[str, int, int], ...] = (("A", 15, 50), ("B", 7, 30))
    node_cap: int = 300
    piece_cap: int = 2000
    replications: int = 5

    def __post_init__(self):
        object.__setattr__(self, "train_sizes", tuple(int(n) for n in self.train_sizes))
        object.__setattr__(self, "generator_sizes", tuple(
            (str(f), int(i), int(b)) for f, i, b in self.generator_sizes
        ))
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        counts = (
            self.n_dual_instances,
            self.test_size,
            self.kappa_max,
            self.node_cap,
            self.piece_cap,
            self.replications,
            *self.train_sizes,
        )
        if any(v < 1 for v in counts):
            raise ValueError("all experiment counts must be >= 1")
        if self.selector_kind not in ("forest", "linear"):
            raise ValueError("selector_kind must be 'forest' or 'linear'")

    def family_sizes(self) -> dict:
        return {Family(f): (i, b) for f, i, b in self.generator_sizes}

    def to_json(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "n_dual_instances": self.n_dual_instances,
            "train_sizes": list(self.train_sizes),
            "test_size": self.test_size,
            "kappa_max": self.kappa_max,
            "selector_kind": self.selector_kind,
            "forest_hyperparams": self.forest_hyperparams.to_json(),
            "generator_sizes": [list(g) for g in self.generator_sizes],
            "node_cap": self.node_cap,
            "piece_cap": self.piece_cap,
            "replications": self.replications,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        if d.get("version") != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {d.get('version')!r}")
        return cls(
            seed=int(d["seed"]),
            n_dual_instances=int(d["n_dual_instances"]),
            train_sizes=tuple(d["train_sizes"]),
            test_size=int(d["test_size"]),
            kappa_max=int(d["kappa_max"]),
            selector_kind=d["selector_kind"],
            forest_hyperparams=ForestHyperparams.from_json(d["forest_hyperparams"]),
            generator_sizes=tuple(tuple(g) for g in d["generator_sizes"]),
            node_cap=int(d["node_cap"]),
            piece_cap=int(d["piece_cap"]),
            replications=int(d["replications"]),
        )


@dataclass(frozen=True)
class CurvePoint:
    kappa: int
    test_ratio: float
    train_ratio: float
    oracle_ratio: float
    train_size: int
    replication: int

    def __post_init__(self):
        if min(self.test_ratio, self.train_ratio, self.oracle_ratio) <= 0:
            raise ValueError("ratios must be positive")


@dataclass(frozen=True)
class ExperimentResult:
    points: tuple[CurvePoint, ...]
    greedy_params: tuple[float, ...]  # portfolio in pick order
    greedy_gains: tuple[float, ...]
    diagnostics: tuple[dict, ...]  # absolute curve values per (size, replication, kappa)
    warnings: tuple[str, ...]


def _trace_task(args):
    instance, node_cap, piece_cap = args
    return dual_trace(instance, node_cap, piece_cap)


def _label_task(args):
    instance, params, node_cap = args
    cache = LpCache(instance)
    features = extract_features(instance)
    labels = [bnb_run(instance, rho, node_cap, cache=cache).tree_size for rho in params]
    return features, labels


def _map(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _label_set(instances, params, node_cap, jobs):
    out = _map(_label_task, [(inst, params, node_cap) for inst in instances], jobs)
    features = np.array([f for f, _ in out])
    labels = np.array([l for _, l in out], dtype=float)
    return features, labels


def _fit_models(kind, X, labels, hp, seed):
    """One score model per portfolio entry (labels column), in pick order."""
    if kind == "forest":
        return [
            fit_forest(X, labels[:, j], hp, seed=seed, stream=j)
            for j in range(labels.shape[1])
        ]
    return [fit_linear(X, labels[:, j]) for j in range(labels.shape[1])]


def _predict_models(kind, models, X):
    if kind == "forest":
        cols = [forest_predict(trees, X) for trees in models]
    else:
        cols = [linear_predict(w, X) for w in models]
    return np.column_stack(cols)


def run_experiment_detailed(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Full pipeline returning curve points plus absolute-value diagnostics."""
    sizes = config.family_sizes()
    seed = config.seed
    dual_instances = sample_mixed_instances(
        config.n_dual_instances, np.random.SeedSequence((seed, 0)), sizes
    )
    fns = _map(_trace_task, [(z, config.node_cap, config.piece_cap) for z in dual_instances], jobs)
    table = build_table(fns, Orientation.MINIMIZE, float(config.node_cap))
    order, gains = greedy_order(table, config.kappa_max)
    warnings = []
    if len(order) < config.kappa_max:
        warnings.append(
            f"greedy stopped early at {len(order)} of {config.kappa_max} entries; curves truncated"
        )
    params = tuple(order)

    points: list[CurvePoint] = []
    diagnostics: list[dict] = []
    for s_idx, n_train in enumerate(config.train_sizes):
        for rep in range(config.replications):
            train = sample_mixed_instances(
                n_train, np.random.SeedSequence((seed, 1, s_idx, rep)), sizes
            )
            test = sample_mixed_instances(
                config.test_size, np.random.SeedSequence((seed, 2, s_idx, rep)), sizes
            )
            X_train, y_train = _label_set(train, params, config.node_cap, jobs)
            X_test, y_test = _label_set(test, params, config.node_cap, jobs)
            model_seed = int(
                np.random.default_rng(np.random.SeedSequence((seed, 3, s_idx, rep))).integers(2**62)
            )
            models = _fit_models(
                config.selector_kind, X_train, y_train, config.forest_hyperparams, model_seed
            )
            p_train = _predict_models(config.selector_kind, models, X_train)
            p_test = _predict_models(config.selector_kind, models, X_test)

            base = None
            for kappa in range(1, len(params) + 1):
                sel_test = np.argmin(p_test[:, :kappa], axis=1)
                sel_train = np.argmin(p_train[:, :kappa], axis=1)
                v_test = float(y_test[np.arange(len(test)), sel_test].mean())
                v_train = float(y_train[np.arange(len(train)), sel_train].mean())
                v_oracle = float(y_test[:, :kappa].min(axis=1).mean())
                o_train = float(y_train[:, :kappa].min(axis=1).mean())
                if kappa == 1:
                    base = (v_test, v_train, v_oracle)
                points.append(
                    CurvePoint(
                        kappa=kappa,
                        test_ratio=v_test / base[0],
                        train_ratio=v_train / base[1],
                        oracle_ratio=v_oracle / base[2],
                        train_size=n_train,
                        replication=rep,
                    )
                )
                diagnostics.append(
                    {
                        "train_size": n_train,
                        "replication": rep,
                        "kappa": kappa,
                        "v_test": v_test,
                        "v_train": v_train,
                        "v_oracle_test": v_oracle,
                        "v_oracle_train": o_train,
                        "epsilon_train": v_train - o_train,
                    }
                )
    return ExperimentResult(
        points=tuple(points),
        greedy_params=params,
        greedy_gains=tuple(gains),
        diagnostics=tuple(diagnostics),
        warnings=tuple(warnings),
    )


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[CurvePoint]:
    """Curve points of the overfitting-tradeoff experiment; see the module docstring."""
    return list(run_experiment_detailed(config, jobs=jobs).points)


def measure_gap(selector, train_features, train_labels, test_features, test_labels) -> float:
    """|train average - test average| of the selector's achieved utility."""
    from .selectors import average_performance

    train_labels = np.asarray(train_labels, dtype=float)
    test_labels = np.asarray(test_labels, dtype=float)
    if train_labels.size == 0 or test_labels.size == 0:
        raise ValueError("train and test sets must be nonempty")
    a = average_performance(selector, train_features, train_labels)
    b = average_performance(selector, test_features, test_labels)
    return abs(a - b)


# ---------------------------------------------------------------------------
# export


def export_curves(points, path_prefix: str) -> tuple[str, str]:
    """Write curves to ``<prefix>.csv`` and a line chart to ``<prefix>.svg``.

    Output bytes are a pure function of the points. The SVG draws one test
    series per training-set size, the oracle series (mean over all runs), and
    the train series of the largest training-set size.
    """
    points = list(points)
    if not points:
        raise ValueError("no curve points to export")
    csv_path = f"{path_prefix}.csv"
    svg_path = f"{path_prefix}.svg"
    lines = [CSV_HEADER]
    for p in points:
        lines.append(
            f"{p.train_size},{p.replication},{p.kappa},{p.test_ratio!r},{p.train_ratio!r},{p.oracle_ratio!r}"
        )
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(svg_path, "w") as fh:
        fh.write(render_curves_svg(points))
    return csv_path, svg_path


def parse_curves_csv(path: str) -> list[CurvePoint]:
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    out = []
    for row in rows[1:]:
        size, rep, kappa, test_r, train_r, oracle_r = row.split(",")
        out.append(
            CurvePoint(
                kappa=int(kappa),
                test_ratio=float(test_r),
                train_ratio=float(train_r),
                oracle_ratio=float(oracle_r),
                train_size=int(size),
                replication=int(rep),
            )
        )
    return out


def _mean_series(points, value):
    """kappa -> mean of ``value(point)`` over the given points."""
    acc: dict[int, list[float]] = {}
    for p in points:
        acc.setdefault(p.kappa, []).append(value(p))
    return {k: sum(v) / len(v) for k, v in sorted(acc.items())}


def render_curves_svg(points) -> str:
    """Standalone SVG: one polyline per series, deterministic bytes."""
    width, height, margin = 640, 420, 50
    sizes = sorted({p.train_size for p in points})
    series: list[tuple[str, dict]] = []
    for n in sizes:
        series.append((f"test N={n}", _mean_series([p for p in points if p.train_size == n], lambda p: p.test_ratio)))
    series.append(("oracle", _mean_series(points, lambda p: p.oracle_ratio)))
    largest = sizes[-1]
    series.append((f"train N={largest}", _mean_series([p for p in points if p.train_size == largest], lambda p: p.train_ratio)))

    kappas = sorted({p.kappa for p in points})
    all_vals = [v for _, s in series for v in s.values()]
    lo, hi = min(all_vals), max(all_vals)
    if hi - lo < 1e-9:
        hi = lo + 1.0
    span_x = max(kappas) - min(kappas) or 1

    def sx(k):
        return margin + (k - min(kappas)) / span_x * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - lo) / (hi - lo) * (height - 2 * margin)

    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf", "#d62728", "#7f7f7f"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" font-size="13" text-anchor="middle">portfolio size</text>',
        f'<text x="14" y="{height // 2}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {height // 2})">ratio to kappa=1</text>',
    ]
    for k in kappas:
        out.append(
            f'<text x="{sx(k):.2f}" y="{height - margin + 16}" font-size="10" text-anchor="middle">{k}</text>'
        )
    for idx, (name, s) in enumerate(series):
        color = palette[idx % len(palette)]
        pts = " ".join(f"{sx(k):.2f},{sy(v):.2f}" for k, v in s.items())
        dash = ' stroke-dasharray="6,3"' if name == "oracle" else ""
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>')
        out.append(
            f'<text x="{width - margin + 4}" y="{margin + 14 * idx}" font-size="11" fill="{color}">{name}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_manifest(path: str, config: ExperimentConfig, timings: dict, extra: dict | None = None) -> None:
    """Reproducibility manifest; only the ``timings`` block varies between runs."""
    manifest = {
        "version": CONFIG_VERSION,
        "config": config.to_json(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "timings": dict(timings),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
