"""Trainable algorithm selectors mapping feature vectors to portfolio entries.

Feature datasets are plain numpy arrays of shape (n_samples, m); a single
feature vector is shape (m,). Every selector exposes

    select(phi)        -> (parameter, index)   one feature vector
    select_many(X)     -> index array          one row per sample

with best-predicted-performance semantics: argmax of the per-entry scores
under Maximize, argmin under Minimize, exact ties to the lowest index.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .piecewise import Orientation, PerformanceTable
from .portfolio import Portfolio

RIDGE_DAMPING = 1e-6
_SPLIT_GAIN_TOL = 1e-12

SERIAL_VERSION = "v1"


def portfolio_labels(table: PerformanceTable, portfolio: Portfolio) -> np.ndarray:
    """The (n_instances, kappa) utility block of the portfolio's columns."""
    cols = [table.column_index(p) for p in portfolio.params]
    return table.utilities[:, cols]


def _argbest(scores: np.ndarray, orientation: Orientation) -> int:
    if orientation is Orientation.MAXIMIZE:
        return int(np.argmax(scores))
    return int(np.argmin(scores))


def _argbest_rows(scores: np.ndarray, orientation: Orientation) -> np.ndarray:
    if orientation is Orientation.MAXIMIZE:
        return np.argmax(scores, axis=1)
    return np.argmin(scores, axis=1)


# ---------------------------------------------------------------------------
# linear performance models


@dataclass(frozen=True)
class LinearSelector:
    """One least-squares score column per portfolio entry, intercept included.

    ``weights`` has shape (m + 1, kappa); the last row is the intercept, which
    is equivalent to extending the feature map with a constant coordinate.
    """

    weights: np.ndarray
    portfolio: Portfolio
    orientation: Orientation

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[1] != len(self.portfolio.params):
            raise ValueError("weights must be (m + 1, kappa)")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0] - 1

    def scores(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.n_features,):
            raise ValueError(f"expected {self.n_features} features, got {phi.shape}")
        return np.append(phi, 1.0) @ self.weights

    def scores_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.hstack([X, np.ones((X.shape[0], 1))]) @ self.weights

    def select(self, phi) -> tuple[float, int]:
        idx = _argbest(self.scores(phi), self.orientation)
        return self.portfolio.params[idx], idx

    def select_many(self, X) -> np.ndarray:
        return _argbest_rows(self.scores_many(X), self.orientation)


def fit_linear(features, y) -> np.ndarray:
    """Ridge-damped least-squares weights (m + 1,) with intercept last."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(y, dtype=float)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    gram = Xa.T @ Xa + RIDGE_DAMPING * np.eye(Xa.shape[1])
    return np.linalg.solve(gram, Xa.T @ y)


def linear_predict(weights, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))]) @ np.asarray(weights, dtype=float)


def train_linear(features, table: PerformanceTable, portfolio: Portfolio) -> LinearSelector:
    """Ridge-damped ordinary least squares per portfolio entry.

    Column j of the weight matrix fits the utilities of entry j against the
    features augmented with a constant-1 intercept coordinate; the tiny ridge
    term only guards rank deficiency.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be (n_samples, m)")
    if X.shape[0] != table.n_instances:
        raise ValueError("features and table row counts differ")
    Y = portfolio_labels(table, portfolio)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    gram = Xa.T @ Xa + RIDGE_DAMPING * np.eye(Xa.shape[1])
    W = np.linalg.solve(gram, Xa.T @ Y)
    return LinearSelector(W, portfolio, table.orientation)


# ---------------------------------------------------------------------------
# regression forests


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 100
    max_leaves: int = 64
    min_samples_leaf: int = 2
    feature_fraction: float = 1.0
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.max_leaves < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees, max_leaves, min_samples_leaf must be >= 1")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ValueError("feature_fraction must be in (0, 1]")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_leaves": self.max_leaves,
            "min_samples_leaf": self.min_samples_leaf,
            "feature_fraction": self.feature_fraction,
            "bootstrap": self.bootstrap,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ForestHyperparams":
        return cls(**d)


class RegressionTree:
    """CART-style variance-reduction tree stored as flat parallel arrays.

    ``feature[k] == -1`` marks node k as a leaf predicting ``value[k]``;
    samples with x[feature] <= threshold descend left.
    """

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict_one(self, phi) -> float:
        k = 0
        while self.feature[k] >= 0:
            k = self.left[k] if phi[self.feature[k]] <= self.threshold[k] else self.right[k]
        return float(self.value[k])

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.array([self.predict_one(row) for row in X])

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "RegressionTree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


def _best_split(X, y, idx, min_leaf, features):
    """Best (gain, feature, threshold) over the given feature subset, or None."""
    n = idx.shape[0]
    if n < 2 * min_leaf:
        return None
    ys = y[idx]
    total1 = ys.sum()
    total2 = (ys * ys).sum()
    sse_parent = total2 - total1 * total1 / n
    best = None
    for j in features:
        xs = X[idx, j]
        order = np.argsort(xs, kind="stable")
        xo = xs[order]
        yo = ys[order]
        c1 = np.cumsum(yo)[:-1]
        c2 = np.cumsum(yo * yo)[:-1]
        k = np.arange(1, n)
        valid = xo[1:] > xo[:-1]
        valid &= (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        sse_l = c2 - c1 * c1 / k
        sse_r = (total2 - c2) - (total1 - c1) ** 2 / (n - k)
        gain = np.where(valid, sse_parent - sse_l - sse_r, -np.inf)
        pos = int(np.argmax(gain))  # first max -> smallest threshold
        if gain[pos] > _SPLIT_GAIN_TOL and (best is None or gain[pos] > best[0]):
            thr = (xo[pos] + xo[pos + 1]) / 2.0
            if thr >= xo[pos + 1]:  # midpoint rounded up between adjacent floats
                thr = xo[pos]
            best = (float(gain[pos]), int(j), float(thr))
    return best


def _grow_tree(X, y, hp: ForestHyperparams, rng: np.random.Generator) -> RegressionTree:
    """Best-first growth: always split the leaf with the largest variance reduction."""
    n, m = X.shape
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    value = [float(y.mean())]
    members = {0: np.arange(n)}

    def candidate_features():
        if hp.feature_fraction >= 1.0:
            return np.arange(m)
        k = max(1, int(round(hp.feature_fraction * m)))
        return np.sort(rng.choice(m, size=k, replace=False))

    heap: list[tuple[float, int, int, tuple]] = []
    seq = 0

    def consider(node):
        nonlocal seq
        split = _best_split(X, y, members[node], hp.min_samples_leaf, candidate_features())
        if split is not None:
            heapq.heappush(heap, (-split[0], seq, node, split))
            seq += 1

    consider(0)
    n_leaves = 1
    while heap and n_leaves < hp.max_leaves:
        _, _, node, (gain, j, thr) = heapq.heappop(heap)
        idx = members.pop(node)
        go_left = X[idx, j] <= thr
        if not go_left.any() or go_left.all():  # degenerate threshold: leave as a leaf
            continue
        kids = []
        for sub in (idx[go_left], idx[~go_left]):
            kid = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[sub].mean()))
            members[kid] = sub
            kids.append(kid)
        feature[node] = j
        threshold[node] = thr
        left[node], right[node] = kids
        value[node] = 0.0
        n_leaves += 1
        consider(kids[0])
        consider(kids[1])
    return RegressionTree(feature, threshold, left, right, value)


@dataclass(frozen=True)
class ForestSelector:
    """One regression forest per portfolio entry; forest score = mean of its trees."""

    forests: tuple[tuple[RegressionTree, ...], ...]
    portfolio: Portfolio
    orientation: Orientation
    hyperparams: ForestHyperparams
    seed: int

    def __post_init__(self):
        if len(self.forests) != len(self.portfolio.params):
            raise ValueError("need one forest per portfolio entry")
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    def scores(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        return np.array(
            [np.mean([t.predict_one(phi) for t in forest]) for forest in self.forests]
        )

    def scores_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty((X.shape[0], len(self.forests)))
        for j, forest in enumerate(self.forests):
            out[:, j] = np.mean([t.predict(X) for t in forest], axis=0)
        return out

    def select(self, phi) -> tuple[float, int]:
        idx = _argbest(self.scores(phi), self.orientation)
        return self.portfolio.params[idx], idx

    def select_many(self, X) -> np.ndarray:
        return _argbest_rows(self.scores_many(X), self.orientation)


def fit_forest(
    features, y, hyperparams: ForestHyperparams | None = None, seed: int = 0, stream: int = 0
) -> tuple[RegressionTree, ...]:
    """One regression forest on raw labels.

    Tree t trains from the generator seeded by SeedSequence((seed, stream, t)),
    so results are independent of training order; ``stream`` distinguishes the
    portfolio entry a forest belongs to.
    """
    hp = hyperparams or ForestHyperparams()
    X = np.asarray(features, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be (n_samples, m) with aligned labels")
    if X.shape[0] < hp.min_samples_leaf:
        raise ValueError("fewer samples than min_samples_leaf")
    trees = []
    for t in range(hp.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence((seed, stream, t)))
        if hp.bootstrap:
            pick = rng.integers(0, X.shape[0], size=X.shape[0])
            trees.append(_grow_tree(X[pick], y[pick], hp, rng))
        else:
            trees.append(_grow_tree(X, y, hp, rng))
    return tuple(trees)


def forest_predict(trees, X) -> np.ndarray:
    """Mean of the trees' predictions, one value per sample row."""
    X = np.asarray(X, dtype=float)
    return np.mean([t.predict(X) for t in trees], axis=0)


def train_forest(
    features,
    table: PerformanceTable,
    portfolio: Portfolio,
    hyperparams: ForestHyperparams | None = None,
    seed: int = 0,
) -> ForestSelector:
    """Bootstrap-resampled variance-reduction forests, one per portfolio entry."""
    hp = hyperparams or ForestHyperparams()
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValueError("features must be (n_samples, m)")
    if X.shape[0] != table.n_instances:
        raise ValueError("features and table row counts differ")
    Y = portfolio_labels(table, portfolio)
    forests = tuple(
        fit_forest(X, Y[:, entry], hp, seed=seed, stream=entry) for entry in range(Y.shape[1])
    )
    return ForestSelector(forests, portfolio, table.orientation, hp, seed)


# ---------------------------------------------------------------------------
# clustering-based selectors


@dataclass(frozen=True)
class ClusterSelector:
    """Nearest-center selector: each center carries an assigned portfolio entry.

    ``centers`` has one row per center. Inference measures distance in the
    p-norm even though training clusters with squared Euclidean distance.
    """

    centers: np.ndarray
    assigned_index: tuple[int, ...]
    portfolio: Portfolio
    norm_p: float
    orientation: Orientation

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.ndim != 2 or c.shape[0] != len(self.portfolio.params):
            raise ValueError("need one center row per portfolio entry")
        if len(self.assigned_index) != c.shape[0]:
            raise ValueError("need one assigned entry per center")
        if not self.norm_p >= 1.0 or not np.isfinite(self.norm_p):
            raise ValueError("norm_p must be a finite value >= 1")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    def _nearest(self, phi) -> int:
        # p-th powers preserve the ordering of p-norm distances
        d = (np.abs(self.centers - phi) ** self.norm_p).sum(axis=1)
        return int(np.argmin(d))

    def select(self, phi) -> tuple[float, int]:
        phi = np.asarray(phi, dtype=float)
        idx = self.assigned_index[self._nearest(phi)]
        return self.portfolio.params[idx], idx

    def select_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d = (np.abs(X[:, None, :] - self.centers[None, :, :]) ** self.norm_p).sum(axis=2)
        nearest = np.argmin(d, axis=1)
        return np.array(self.assigned_index)[nearest]


def _kmeans(X, k, rng, n_iter=100, tol=1e-9):
    """Lloyd iterations from farthest-point seeding; empty clusters keep their center."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(0, n))
    centers[0] = X[first]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        centers[j] = X[int(np.argmax(d2))]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    assign = None
    for _ in range(n_iter):
        dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(dist, axis=1)
        moved = 0.0
        for j in range(k):
            pts = X[assign == j]
            if pts.shape[0]:
                new = pts.mean(axis=0)
                moved = max(moved, float(np.abs(new - centers[j]).max()))
                centers[j] = new
        if moved <= tol:
            break
    dist = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return centers, np.argmin(dist, axis=1)


def train_cluster(
    features,
    table: PerformanceTable,
    portfolio: Portfolio,
    norm_p: float = 2.0,
    seed: int = 0,
) -> ClusterSelector:
    """k-means the features (k = portfolio size), then give each cluster the
    portfolio entry with the best average utility over its member rows.

    Clusters that end up empty fall back to the best entry over all rows.
    """
    X = np.asarray(features, dtype=float)
    k = len(portfolio.params)
    if k > X.shape[0]:
        raise ValueError("portfolio size exceeds the sample count")
    if X.shape[0] != table.n_instances:
        raise ValueError("features and table row counts differ")
    rng = np.random.default_rng(seed)
    centers, assign = _kmeans(X, k, rng)
    Y = portfolio_labels(table, portfolio)
    assigned = []
    for j in range(k):
        rows = assign == j
        block = Y[rows] if rows.any() else Y
        assigned.append(_argbest(block.mean(axis=0), table.orientation))
    return ClusterSelector(centers, tuple(assigned), portfolio, norm_p, table.orientation)


# ---------------------------------------------------------------------------
# oracle and averages


def oracle_select(table: PerformanceTable, portfolio: Portfolio, row: int) -> tuple[float, int]:
    """The portfolio entry with the best true utility for one table row."""
    if not 0 <= row < table.n_instances:
        raise ValueError(f"row {row} out of range")
    labels = portfolio_labels(table, portfolio)
    idx = _argbest(labels[row], table.orientation)
    return portfolio.params[idx], idx


def oracle_average(labels: np.ndarray, orientation: Orientation) -> float:
    """Mean of the per-row best utility over portfolio-entry label columns."""
    labels = np.asarray(labels, dtype=float)
    best = labels.max(axis=1) if Orientation(orientation) is Orientation.MAXIMIZE else labels.min(axis=1)
    return float(best.mean())


def average_performance(selector, features, labels) -> float:
    """Mean achieved utility of the selector's choices; labels align with the portfolio."""
    labels = np.asarray(labels, dtype=float)
    X = np.asarray(features, dtype=float)
    if labels.shape[0] != X.shape[0]:
        raise ValueError("features and labels must align")
    chosen = selector.select_many(X)
    return float(labels[np.arange(labels.shape[0]), chosen].mean())


def selector_average_on_table(selector, features, table: PerformanceTable) -> float:
    """``average_performance`` against a table's portfolio-entry columns."""
    return average_performance(selector, features, portfolio_labels(table, selector.portfolio))


# ---------------------------------------------------------------------------
# serialization


def selector_to_json(selector) -> dict:
    base = {
        "version": SERIAL_VERSION,
        "portfolio": selector.portfolio.to_json(),
        "orientation": selector.orientation.value,
    }
    if isinstance(selector, LinearSelector):
        base["model"] = "linear"
        base["weights"] = [[float(v) for v in row] for row in selector.weights]
    elif isinstance(selector, ForestSelector):
        base["model"] = "forest"
        base["hyperparams"] = selector.hyperparams.to_json()
        base["seed"] = selector.seed
        base["forests"] = [[t.to_json() for t in forest] for forest in selector.forests]
    elif isinstance(selector, ClusterSelector):
        base["model"] = "cluster"
        base["norm_p"] = selector.norm_p
        base["centers"] = [[float(v) for v in row] for row in selector.centers]
        base["assigned_index"] = list(selector.assigned_index)
    else:
        raise ValueError(f"cannot serialize selector of type {type(selector).__name__}")
    return base


def selector_from_json(d: dict):
    if d.get("version") != SERIAL_VERSION:
        raise ValueError(f"unsupported selector version {d.get('version')!r}")
    portfolio = Portfolio.from_json(d["portfolio"])
    orientation = Orientation(d["orientation"])
    model = d["model"]
    if model == "linear":
        return LinearSelector(np.array(d["weights"], dtype=float), portfolio, orientation)
    if model == "forest":
        forests = tuple(
            tuple(RegressionTree.from_json(t) for t in forest) for forest in d["forests"]
        )
        return ForestSelector(
            forests,
            portfolio,
            orientation,
            ForestHyperparams.from_json(d["hyperparams"]),
            int(d["seed"]),
        )
    if model == "cluster":
        return ClusterSelector(
            np.array(d["centers"], dtype=float),
            tuple(d["assigned_index"]),
            portfolio,
            float(d["norm_p"]),
            orientation,
        )
    raise ValueError(f"unknown selector model {model!r}")
