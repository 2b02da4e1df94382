"""Portfolio construction over a performance table: greedy, exhaustive, diagnostics.

Minimize-oriented tables are handled by value reflection u -> H - u, so one
submodular-maximization code path serves both orientations; coverage values
reported to callers are always in the table's own orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .errors import CapacityError, ConsistencyError
from .piecewise import Orientation, PerformanceTable

GREEDY_ALPHA = 1.0 - 1.0 / math.e
EXHAUSTIVE_GUARD = 10**7
_EPS_TOL = 1e-9


class SelectionMethod(str, Enum):
    GREEDY = "greedy"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class Portfolio:
    """At most ``kappa_cap`` distinct parameter values, stored sorted."""

    params: tuple[float, ...]
    kappa_cap: int

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kappa_cap < 1:
            raise ValueError("kappa_cap must be >= 1")
        if not self.params:
            raise ValueError("portfolio must contain at least one parameter")
        if list(self.params) != sorted(set(self.params)):
            raise ValueError("params must be sorted and distinct")
        if len(self.params) > self.kappa_cap:
            raise ValueError("portfolio exceeds its kappa cap")

    def __len__(self) -> int:
        return len(self.params)

    def to_json(self) -> dict:
        return {"params": list(self.params), "kappa_cap": self.kappa_cap}

    @classmethod
    def from_json(cls, d: dict) -> "Portfolio":
        return cls(tuple(d["params"]), int(d["kappa_cap"]))


@dataclass(frozen=True)
class OptimalityReport:
    """(alpha, beta, epsilon) certificate of Definition-style near-optimality."""

    alpha: float
    beta: float
    epsilon: float
    train_coverage: float
    opt_coverage_or_bound: float

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "train_coverage": self.train_coverage,
            "opt_coverage_or_bound": self.opt_coverage_or_bound,
        }


def _column_indices(table: PerformanceTable, params) -> list[int]:
    return [table.column_index(p) for p in params]


def coverage(table: PerformanceTable, subset) -> float:
    """Sum over instances of the best utility available within ``subset``.

    Best means max under Maximize and min under Minimize. ``subset`` may be a
    Portfolio or any iterable of candidate parameters.
    """
    params = subset.params if isinstance(subset, Portfolio) else tuple(subset)
    if not params:
        raise ValueError("subset must be nonempty")
    cols = _column_indices(table, params)
    block = table.utilities[:, cols]
    if table.orientation is Orientation.MAXIMIZE:
        return float(block.max(axis=1).sum())
    return float(block.min(axis=1).sum())


def greedy_order(table: PerformanceTable, kappa: int) -> tuple[list[float], list[float]]:
    """Greedy picks in selection order plus their marginal coverage gains.

    Gains are measured on the reflected (larger-is-better) scale; under
    Minimize a gain is the decrease in summed best-choice utility. Selection
    stops early once no candidate has a strictly positive gain.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if table.n_candidates < 1:
        raise ValueError("table has no candidates")
    G = table.gain_matrix()
    params = np.array(table.candidates.params)
    best = np.zeros(G.shape[0])
    taken = np.zeros(G.shape[1], dtype=bool)
    picks: list[float] = []
    gains: list[float] = []
    for _ in range(min(kappa, G.shape[1])):
        margins = np.maximum(G - best[:, None], 0.0).sum(axis=0)
        margins[taken] = -1.0
        j = int(np.argmax(margins))  # ties: first index = smallest parameter
        if margins[j] <= 0.0:
            break
        picks.append(float(params[j]))
        gains.append(float(margins[j]))
        taken[j] = True
        best = np.maximum(best, G[:, j])
    if not picks:
        # zero-gain degenerate table: the smallest parameter is still a valid pick
        picks.append(float(params[0]))
        gains.append(0.0)
    return picks, gains


def greedy_select(table: PerformanceTable, kappa: int) -> tuple[Portfolio, list[float]]:
    """Greedy submodular portfolio of size <= kappa with its marginal gains."""
    picks, gains = greedy_order(table, kappa)
    return Portfolio(tuple(sorted(picks)), kappa), gains


def exhaustive_select(table: PerformanceTable, kappa: int) -> Portfolio:
    """Coverage-optimal portfolio by enumeration of all size-min(kappa, M) subsets.

    Coverage is monotone in the subset, so enumerating exactly
    min(kappa, M)-sized subsets finds an optimal size-<=kappa portfolio; ties
    break lexicographically on the sorted parameter tuple.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    M = table.n_candidates
    k = min(kappa, M)
    if math.comb(M, k) > EXHAUSTIVE_GUARD:
        raise CapacityError(
            f"C({M}, {k}) exceeds {EXHAUSTIVE_GUARD:g} subsets; use greedy_select instead"
        )
    G = table.gain_matrix()
    best_cov = -np.inf
    best_subset: tuple[int, ...] | None = None
    for subset in combinations(range(M), k):
        cov = G[:, subset].max(axis=1).sum()
        if cov > best_cov:  # first enumeration order is lexicographic on params
            best_cov = cov
            best_subset = subset
    params = tuple(table.candidates.params[j] for j in best_subset)
    return Portfolio(params, kappa)


def verify_monotone_submodular(table: PerformanceTable, trials: int, seed: int) -> bool:
    """Sample (T, rho1, rho2) triples and check monotonicity and submodularity.

    Under Minimize the checks run on the reflected set function (which the
    min-coverage mirrors exactly). Vacuously true for single-column tables.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    M = table.n_candidates
    if M < 2:
        return True
    G = table.gain_matrix()
    rng = np.random.default_rng(seed)
    r1 = rng.integers(0, M, size=trials)
    r2 = rng.integers(0, M - 1, size=trials)
    r2 = r2 + (r2 >= r1)
    mask = rng.random((trials, M)) < 0.5
    mask[np.arange(trials), r1] = False
    mask[np.arange(trials), r2] = False
    u_t, u_t1, u_t2, u_t12 = _triple_coverages(G, mask, r1, r2)
    monotone = np.all(u_t1 >= u_t - _EPS_TOL)
    submodular = np.all(u_t1 + u_t2 >= u_t12 + u_t - _EPS_TOL)
    return bool(monotone and submodular)


def _triple_coverages(G, mask, r1, r2):
    """Coverages of T, T+r1, T+r2, T+r1+r2 for each sampled trial row."""
    sel = np.where(mask[:, None, :], G[None, :, :], -np.inf)
    base = sel.max(axis=2)
    base = np.where(np.isfinite(base), base, 0.0)  # empty T covers nothing
    v1 = G[:, r1].T
    v2 = G[:, r2].T
    u_t = base.sum(axis=1)
    u_t1 = np.maximum(base, v1).sum(axis=1)
    u_t2 = np.maximum(base, v2).sum(axis=1)
    u_t12 = np.maximum(np.maximum(base, v1), v2).sum(axis=1)
    return u_t, u_t1, u_t2, u_t12


def optimality_report(
    table: PerformanceTable,
    portfolio: Portfolio,
    selector_train_avg: float,
    method: SelectionMethod,
) -> OptimalityReport:
    """Fill the (alpha, beta, epsilon) diagnostics for a constructed portfolio.

    ``epsilon`` is the per-instance gap between the portfolio oracle and the
    selector on the training rows; a selector measurably better than its own
    oracle indicates a caller bug and raises ``ConsistencyError``.
    ``opt_coverage_or_bound`` is the optimal portfolio's exact average coverage
    when enumeration is feasible, else the greedy-factor-implied bound on it.
    """
    method = SelectionMethod(method)
    N = table.n_instances
    cov_avg = coverage(table, portfolio) / N
    if table.orientation is Orientation.MAXIMIZE:
        epsilon = cov_avg - selector_train_avg
    else:
        epsilon = selector_train_avg - cov_avg
    if epsilon < -_EPS_TOL:
        raise ConsistencyError(
            f"selector average {selector_train_avg} beats the portfolio oracle {cov_avg}"
        )
    epsilon = max(epsilon, 0.0)
    alpha = 1.0 if method is SelectionMethod.EXHAUSTIVE else GREEDY_ALPHA

    kappa = portfolio.kappa_cap
    M = table.n_candidates
    if math.comb(M, min(kappa, M)) <= EXHAUSTIVE_GUARD:
        opt = coverage(table, exhaustive_select(table, kappa)) / N
    else:
        refl = coverage_reflected(table, portfolio) / N
        bound = refl / GREEDY_ALPHA
        if table.orientation is Orientation.MAXIMIZE:
            opt = bound
        else:
            opt = table.range_cap - bound
    return OptimalityReport(
        alpha=alpha,
        beta=0.0,
        epsilon=float(epsilon),
        train_coverage=float(cov_avg),
        opt_coverage_or_bound=float(opt),
    )


def coverage_reflected(table: PerformanceTable, subset) -> float:
    """Coverage on the reflected larger-is-better scale."""
    params = subset.params if isinstance(subset, Portfolio) else tuple(subset)
    cols = _column_indices(table, params)
    return float(table.gain_matrix()[:, cols].max(axis=1).sum())
