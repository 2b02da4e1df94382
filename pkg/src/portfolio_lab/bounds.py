"""Sample-complexity bound calculators and brute-force shattering verifiers.

The calculators return proof-expression values with unit constants and are
comparative tools only ("up to universal constants"); no implementation can
recover the constants hidden inside the asymptotic statements. The
pseudo-dimension calculator follows the proof's conclusion
(kappa + d_bar) * log(kappa + d_bar) + kappa * log t, which is looser than the
headline d_bar + kappa log t form; both grow the same way in each argument.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CapacityError

UP_TO_CONSTANTS_NOTE = "up to universal constants"


@dataclass(frozen=True)
class BoundQuery:
    """Inputs shared by the bound calculators."""

    d_bar: int
    kappa: int
    t: int
    N: int
    H: float
    delta: float
    alpha: float = 1.0
    beta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        if self.d_bar < 0:
            raise ValueError("d_bar must be >= 0")
        if self.kappa < 1 or self.t < 1 or self.N < 1:
            raise ValueError("kappa, t, N must be >= 1")
        if self.H < 0:
            raise ValueError("H must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.beta < 0 or self.epsilon < 0:
            raise ValueError("beta and epsilon must be >= 0")

    def to_json(self) -> dict:
        return {
            "d_bar": self.d_bar,
            "kappa": self.kappa,
            "t": self.t,
            "N": self.N,
            "H": self.H,
            "delta": self.delta,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
        }


def pdim_upper_bound(q: BoundQuery) -> float:
    """(kappa + d_bar) * log2(kappa + d_bar + 1) + kappa * log2(t)."""
    s = q.kappa + q.d_bar
    return s * math.log2(s + 1) + q.kappa * math.log2(q.t)


def generalization_bound(q: BoundQuery, pdim: float) -> float:
    """H * sqrt((pdim + ln(1/delta)) / N)."""
    if pdim < 0:
        raise ValueError("pdim must be >= 0")
    return q.H * math.sqrt((pdim + math.log(1.0 / q.delta)) / q.N)


def end_to_end_bound(q: BoundQuery) -> float:
    """Total subtractive slack below alpha * OPT for an (alpha, beta, epsilon)
    portfolio-plus-selector pair: epsilon + beta + the generalization term.

    Callers combine the slack with their own OPT estimate; alpha/beta/epsilon
    are echoed from the query wherever the slack is reported.
    """
    return q.epsilon + q.beta + generalization_bound(q, pdim_upper_bound(q))


class SelectorClass(str, Enum):
    LINEAR = "linear"
    TREE = "tree"
    CLUSTER = "cluster"


def natarajan_bound(selector_class, m: int, kappa: int, ell: int = 1, p: float = 2.0) -> float:
    """Natarajan-dimension formulas per selector family, unit constants.

    linear: m * kappa; tree: ell * kappa * log2(ell * kappa * m);
    cluster: m * kappa * log2(m * kappa * p).
    """
    cls = SelectorClass(selector_class)
    if m < 1 or kappa < 1 or ell < 1 or p < 1:
        raise ValueError("m, kappa, ell must be >= 1 and p >= 1")
    if cls is SelectorClass.LINEAR:
        return float(m * kappa)
    if cls is SelectorClass.TREE:
        return ell * kappa * math.log2(ell * kappa * m)
    return m * kappa * math.log2(m * kappa * p)


# ---------------------------------------------------------------------------
# lower-bound construction and shattering verification


@dataclass(frozen=True)
class LowerBoundFamily:
    """Threshold utilities u_rho(z) = 1{z <= rho} with interval selectors.

    The domain (0, 1] splits into kappa intervals Z_i = ((i-1)/kappa, i/kappa];
    the selector indexed by C maps z in Z_i to i/kappa when i is in C and to
    i/kappa - 1/(2 kappa) otherwise, so the utility at the interval's right
    endpoint is exactly the membership indicator of i in C.
    """

    kappa: int
    shattered_set: tuple[float, ...]

    def interval_index(self, z: float) -> int:
        """1-based index i with z in ((i-1)/kappa, i/kappa], robust at endpoints."""
        if not 0.0 < z <= 1.0:
            raise ValueError("z must lie in (0, 1]")
        i = min(self.kappa, max(1, math.ceil(z * self.kappa - 1e-9)))
        while z > i / self.kappa and i < self.kappa:
            i += 1
        while i > 1 and z <= (i - 1) / self.kappa:
            i -= 1
        return i

    def selector_param(self, C, z: float) -> float:
        i = self.interval_index(z)
        if i in C:
            return i / self.kappa
        return i / self.kappa - 1.0 / (2.0 * self.kappa)

    @staticmethod
    def utility(rho: float, z: float) -> float:
        return 1.0 if z <= rho else 0.0

    def realized_labels(self, C) -> tuple[int, ...]:
        """0/1 utilities of the C-selector at the shattered points."""
        return tuple(
            int(self.utility(self.selector_param(C, z), z)) for z in self.shattered_set
        )

    def multiclass_projection(self) -> "MultiClassFamily":
        """All C-selectors share one interval partition, so one function remains."""
        return MultiClassFamily((self.interval_index,))


def lb_construct(kappa: int) -> LowerBoundFamily:
    if kappa < 2:
        raise ValueError("kappa must be >= 2")
    return LowerBoundFamily(kappa, tuple(i / kappa for i in range(1, kappa + 1)))


def lb_verify_shattering(family: LowerBoundFamily) -> bool:
    """Check all 2^kappa subsets realize their indicator labeling on the shattered set."""
    k = family.kappa
    if not 2 <= k <= 20:
        raise CapacityError("shattering enumeration supports 2 <= kappa <= 20")
    for bits in itertools.product((0, 1), repeat=k):
        C = {i + 1 for i, b in enumerate(bits) if b}
        if family.realized_labels(C) != bits:
            return False
    return True


@dataclass(frozen=True)
class MultiClassFamily:
    """A finite family of label functions over hashable problem instances."""

    functions: tuple

    def labels(self, instances) -> np.ndarray:
        return np.array([[int(f(z)) for z in instances] for f in self.functions])


def verify_multiclass_shatter(fam: MultiClassFamily, instances, d: int) -> bool:
    """Does some size-d instance subset admit label pairs realizing all mixtures?

    Exhaustive: for each subset, label pairs (y_i, y_i') with y_i != y_i' are
    drawn from the labels observed at point i, and all 2^d membership patterns
    must be realized by some family member.
    """
    instances = list(instances)
    if d < 1 or d > len(instances):
        raise ValueError("d must lie in [1, len(instances)]")
    L = fam.labels(instances)
    n_fun = L.shape[0]
    pair_bound = max(
        len(set(L[:, i])) * (len(set(L[:, i])) - 1) for i in range(len(instances))
    )
    work = n_fun * math.comb(len(instances), d) * max(1, pair_bound) ** d
    if work > 10**8:
        raise CapacityError("shattering search space exceeds 1e8; shrink d or the instance list")
    for subset in itertools.combinations(range(len(instances)), d):
        patterns = {tuple(L[f, list(subset)]) for f in range(n_fun)}
        if len(patterns) < 2**d:
            continue
        observed = [sorted(set(p[i] for p in patterns)) for i in range(d)]
        pair_choices = [
            [(y, y2) for y in obs for y2 in obs if y != y2] for obs in observed
        ]
        if any(not pc for pc in pair_choices):
            continue
        for pairs in itertools.product(*pair_choices):
            masks = set()
            for p in patterns:
                bits = 0
                for i, (y, y2) in enumerate(pairs):
                    if p[i] == y:
                        bits |= 1 << i
                    elif p[i] != y2:
                        bits = -1
                        break
                if bits >= 0:
                    masks.add(bits)
            if len(masks) == 2**d:
                return True
    return False


# ---------------------------------------------------------------------------
# empirical gap experiment


def lb_gap_experiment(kappa: int, N: int, trials: int, seed: int) -> float:
    """Mean ERM training-average gap over 1/2 in the two-action payoff game.

    Each of N draws lands uniformly on one of kappa points and a fair coin
    decides which of the point's two actions pays 1 on that draw. Per point,
    ERM keeps the majority-payoff action, achieving max(k, n-k)/n there; any
    fixed action has expected payoff 1/2, so the reported mean gap scales as
    sqrt(kappa / N).
    """
    if kappa < 2:
        raise ValueError("kappa must be >= 2")
    if N < kappa:
        raise ValueError("N must be >= kappa")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    done = 0
    chunk = max(1, min(trials, int(2_000_000 // max(N, 1)) or 1))
    while done < trials:
        b = min(chunk, trials - done)
        points = rng.integers(0, kappa, size=(b, N))
        coins = rng.integers(0, 2, size=(b, N))
        offsets = points + kappa * np.arange(b)[:, None]
        n = np.bincount(offsets.ravel(), minlength=b * kappa).reshape(b, kappa)
        k = np.bincount(
            offsets.ravel(), weights=coins.ravel(), minlength=b * kappa
        ).reshape(b, kappa)
        erm = n / 2.0 + np.abs(k - n / 2.0)
        total += float((erm.sum(axis=1) / N - 0.5).sum())
        done += b
    return total / trials
