"""Desk-scale integer programs: representation, generators, and features.

Instances are combinatorial-auction winner-determination set-packing IPs:
one binary variable per bid, one <=1 constraint per item over the bids that
contain it, maximize total accepted price.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .simplex import LpStatus, lp_solve

FRACTIONAL_TOL = 1e-6

FEATURE_DIM = 16


class Family(str, Enum):
    A = "A"  # bundles drawn uniformly over the item set
    B = "B"  # contiguous bundles on a ring of items, superadditive prices


@dataclass(frozen=True)
class IpInstance:
    """Integer program  max c.x  s.t.  A x <= b,  lo <= x <= hi,  x[i] integer for i in I."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    I: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.shape[0])
        b = np.asarray(self.b, dtype=float)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        for name, arr in (("c", c), ("A", A), ("b", b), ("lo", lo), ("hi", hi)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        if A.shape != (b.shape[0], c.shape[0]):
            raise ValueError("A must be (len(b), len(c))")
        if lo.shape != c.shape or hi.shape != c.shape:
            raise ValueError("bounds must match the variable count")
        if np.any(lo > hi):
            raise ValueError("lo must be <= hi componentwise")
        if any(i < 0 or i >= c.shape[0] for i in self.I):
            raise ValueError("integer index out of range")
        for name, arr in (("c", c), ("A", A), ("b", b), ("lo", lo), ("hi", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "I", tuple(sorted(set(int(i) for i in self.I))))

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.b.shape[0]

    def to_json(self) -> dict:
        return {
            "c": [float(v) for v in self.c],
            "A": [[float(v) for v in row] for row in self.A],
            "b": [float(v) for v in self.b],
            "I": list(self.I),
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, d: dict) -> "IpInstance":
        return cls(
            c=np.array(d["c"], dtype=float),
            A=np.array(d["A"], dtype=float).reshape(len(d["b"]), len(d["c"])),
            b=np.array(d["b"], dtype=float),
            I=tuple(d["I"]),
            lo=np.array(d["lo"], dtype=float),
            hi=np.array(d["hi"], dtype=float),
            meta=dict(d.get("meta", {})),
        )


@dataclass(frozen=True)
class GeneratorSpec:
    family: Family
    n_items: int
    n_bids: int
    seed: int

    def __post_init__(self):
        if self.n_items < 1 or self.n_bids < 1:
            raise ValueError("n_items and n_bids must be >= 1")
        object.__setattr__(self, "family", Family(self.family))


DESK_SIZES = {Family.A: (15, 30), Family.B: (20, 40)}


def generate_instance(spec: GeneratorSpec) -> IpInstance:
    """Draw one set-packing winner-determination IP; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n_items, n_bids = spec.n_items, spec.n_bids
    bundles = []
    prices = np.empty(n_bids)
    if spec.family is Family.A:
        for j in range(n_bids):
            size = min(int(rng.integers(2, 6)), n_items)
            bundles.append(np.sort(rng.choice(n_items, size=size, replace=False)))
            prices[j] = size * rng.uniform(0.8, 1.2)
    else:
        for j in range(n_bids):
            size = min(int(rng.integers(2, 7)), n_items)
            start = int(rng.integers(0, n_items))
            bundles.append(np.sort((start + np.arange(size)) % n_items))
            prices[j] = size**1.2 * rng.uniform(0.9, 1.1)

    used = sorted({int(i) for bundle in bundles for i in bundle})
    row_of = {item: r for r, item in enumerate(used)}
    A = np.zeros((len(used), n_bids))
    for j, bundle in enumerate(bundles):
        for item in bundle:
            A[row_of[int(item)], j] = 1.0
    return IpInstance(
        c=prices,
        A=A,
        b=np.ones(len(used)),
        I=tuple(range(n_bids)),
        lo=np.zeros(n_bids),
        hi=np.ones(n_bids),
        meta={"family": spec.family.value, "seed": int(spec.seed)},
    )


def sample_mixed_instances(count: int, seed: int, sizes=None) -> list[IpInstance]:
    """Draw ``count`` instances, choosing the family by a fair coin per sample."""
    if count < 1:
        raise ValueError("count must be >= 1")
    sizes = dict(DESK_SIZES if sizes is None else sizes)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        family = Family.A if rng.integers(0, 2) == 0 else Family.B
        items, bids = sizes[family]
        child_seed = int(rng.integers(0, 2**63 - 1))
        out.append(generate_instance(GeneratorSpec(family, items, bids, child_seed)))
    return out


def greedy_packing_value(instance: IpInstance) -> float:
    """Value of the greedy integral packing: bids by descending price, skip conflicts."""
    order = sorted(range(instance.n_vars), key=lambda j: (-instance.c[j], j))
    load = np.zeros(instance.n_constraints)
    total = 0.0
    for j in order:
        col = instance.A[:, j]
        if np.all(load + col <= instance.b + 1e-9):
            load += col
            total += instance.c[j]
    return total


def extract_features(instance: IpInstance) -> np.ndarray:
    """Deterministic 16-feature summary of an instance.

    Layout: n, m_c, density of A, mean/std/min/max of c, mean/std of A row sums,
    mean/std of A column sums, LP objective, fractional-variable count, mean
    fractionality, LP/greedy value ratio, mean clipped constraint slack ratio.
    The LP-dependent entries (the last five) are zeroed when the LP relaxation
    is not optimal; the ratio entry is >= 1 whenever the LP is valid, so
    "ratio == 0" doubles as the LP-validity flag.
    """
    A, c, b = instance.A, instance.c, instance.b
    rows = A.sum(axis=1) if A.size else np.zeros(instance.n_constraints)
    cols = A.sum(axis=0) if A.size else np.zeros(instance.n_vars)
    density = float(np.count_nonzero(A)) / A.size if A.size else 0.0
    feats = [
        float(instance.n_vars),
        float(instance.n_constraints),
        density,
        float(c.mean()),
        float(c.std()),
        float(c.min()),
        float(c.max()),
        float(rows.mean()) if rows.size else 0.0,
        float(rows.std()) if rows.size else 0.0,
        float(cols.mean()),
        float(cols.std()),
    ]
    res = lp_solve(instance)
    if res.status is not LpStatus.OPTIMAL:
        feats += [0.0, 0.0, 0.0, 0.0, 0.0]
        return np.array(feats)
    x = res.x
    frac = np.array([abs(x[i] - round(x[i])) for i in instance.I])
    is_frac = frac > FRACTIONAL_TOL
    greedy = greedy_packing_value(instance)
    slack = (A @ x - b) / np.maximum(np.abs(b), 1e-12) if b.size else np.zeros(0)
    feats += [
        res.objective,
        float(is_frac.sum()),
        float(frac[is_frac].mean()) if is_frac.any() else 0.0,
        res.objective / greedy if greedy > 0 else 0.0,
        float(np.clip(slack, -1.0, 0.0).mean()) if slack.size else 0.0,
    ]
    return np.array(feats)
