"""Piecewise-constant dual functions, candidate extraction, performance tables.

A dual function maps the solver parameter rho to the performance obtained on
one fixed instance. Pieces are left-closed/right-open [b_{j-1}, b_j); the last
piece is closed at the upper domain end, so eval at a breakpoint returns the
value of the piece that begins there.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, RangeError

BREAKPOINT_DEDUP_TOL = 1e-12


class Orientation(str, Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"


@dataclass(frozen=True)
class PiecewiseConstantFn:
    """Step function on [domain_lo, domain_hi] with sorted interior breakpoints.

    ``piece_capped`` is optional per-piece metadata (True where the value came
    from a node-cap-limited run); it is carried through canonicalization but
    not serialized.
    """

    domain_lo: float
    domain_hi: float
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    piece_capped: tuple[bool, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.domain_lo < self.domain_hi:
            raise ValueError("domain_lo must be < domain_hi")
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("values must have one more entry than breakpoints")
        prev = self.domain_lo
        for b in self.breakpoints:
            if not prev < b:
                raise ValueError("breakpoints must be strictly increasing inside the domain")
            prev = b
        if self.breakpoints and not self.breakpoints[-1] < self.domain_hi:
            raise ValueError("breakpoints must lie strictly inside the domain")
        if self.piece_capped is not None and len(self.piece_capped) != len(self.values):
            raise ValueError("piece_capped must align with values")

    @property
    def piece_count(self) -> int:
        return len(self.values)

    def eval(self, rho: float) -> float:
        if not self.domain_lo <= rho <= self.domain_hi:
            raise DomainError(f"rho={rho} outside [{self.domain_lo}, {self.domain_hi}]")
        return self.values[bisect.bisect_right(self.breakpoints, rho)]

    def eval_many(self, rhos) -> np.ndarray:
        rhos = np.asarray(rhos, dtype=float)
        if rhos.size and (rhos.min() < self.domain_lo or rhos.max() > self.domain_hi):
            raise DomainError("a query point lies outside the domain")
        idx = np.searchsorted(np.array(self.breakpoints), rhos, side="right")
        return np.array(self.values)[idx]

    def to_json(self) -> dict:
        return {
            "lo": self.domain_lo,
            "hi": self.domain_hi,
            "breakpoints": list(self.breakpoints),
            "values": list(self.values),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PiecewiseConstantFn":
        return cls(d["lo"], d["hi"], tuple(d["breakpoints"]), tuple(d["values"]))


def canonicalize(f: PiecewiseConstantFn) -> PiecewiseConstantFn:
    """Merge adjacent pieces with equal values; eval is unchanged everywhere."""
    bps: list[float] = []
    vals: list[float] = [f.values[0]]
    capped = None if f.piece_capped is None else [f.piece_capped[0]]
    for j, b in enumerate(f.breakpoints):
        v = f.values[j + 1]
        if v == vals[-1]:
            if capped is not None:
                capped[-1] = capped[-1] or f.piece_capped[j + 1]
            continue
        bps.append(b)
        vals.append(v)
        if capped is not None:
            capped.append(f.piece_capped[j + 1])
    return PiecewiseConstantFn(
        f.domain_lo,
        f.domain_hi,
        tuple(bps),
        tuple(vals),
        None if capped is None else tuple(capped),
    )


@dataclass(frozen=True)
class CandidateSet:
    """One representative parameter per interval of constant joint behavior."""

    params: tuple[float, ...]
    source_interval_count: int

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if list(self.params) != sorted(set(self.params)):
            raise ValueError("params must be sorted and distinct")
        if self.source_interval_count != len(self.params):
            raise ValueError("source_interval_count must equal len(params)")

    def to_json(self) -> dict:
        return {"params": list(self.params), "source_interval_count": self.source_interval_count}

    @classmethod
    def from_json(cls, d: dict) -> "CandidateSet":
        return cls(tuple(d["params"]), int(d["source_interval_count"]))


def extract_candidates(fns) -> CandidateSet:
    """Midpoint representatives of the common refinement of all breakpoints.

    Any rho in the shared domain produces the same vector of function values as
    the representative of the interval containing it.
    """
    fns = list(fns)
    if not fns:
        raise ValueError("need at least one function")
    lo, hi = fns[0].domain_lo, fns[0].domain_hi
    for f in fns:
        if f.domain_lo != lo or f.domain_hi != hi:
            raise ValueError("all functions must share one domain")
    merged: list[float] = []
    for b in sorted(b for f in fns for b in f.breakpoints):
        if not merged or b - merged[-1] > BREAKPOINT_DEDUP_TOL:
            merged.append(b)
    edges = [lo] + merged + [hi]
    reps = tuple((a + b) / 2.0 for a, b in zip(edges[:-1], edges[1:]))
    return CandidateSet(reps, len(reps))


@dataclass(frozen=True, eq=False)
class PerformanceTable:
    """N x M utilities over instances (rows) and candidate parameters (columns)."""

    utilities: np.ndarray
    candidates: CandidateSet
    orientation: Orientation
    range_cap: float

    def __post_init__(self):
        u = np.asarray(self.utilities, dtype=float)
        if u.ndim != 2:
            raise ValueError("utilities must be a 2-D matrix")
        if u.shape[1] != len(self.candidates.params):
            raise ValueError("column count must match the candidate set")
        if self.range_cap < 0:
            raise ValueError("range_cap must be >= 0")
        if u.size and (u.min() < 0 or u.max() > self.range_cap):
            raise RangeError("utilities must lie in [0, range_cap]")
        u.setflags(write=False)
        object.__setattr__(self, "utilities", u)
        object.__setattr__(self, "orientation", Orientation(self.orientation))

    @property
    def n_instances(self) -> int:
        return self.utilities.shape[0]

    @property
    def n_candidates(self) -> int:
        return self.utilities.shape[1]

    def column_index(self, rho: float) -> int:
        try:
            return self.candidates.params.index(rho)
        except ValueError:
            raise ValueError(f"parameter {rho} is not a table candidate") from None

    def gain_matrix(self) -> np.ndarray:
        """Utilities reflected so that larger is always better."""
        if self.orientation is Orientation.MAXIMIZE:
            return self.utilities
        return self.range_cap - self.utilities

    def to_json(self) -> dict:
        return {
            "candidates": self.candidates.to_json(),
            "orientation": self.orientation.value,
            "H": self.range_cap,
            "rows": [[float(v) for v in row] for row in self.utilities],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PerformanceTable":
        return cls(
            utilities=np.array(d["rows"], dtype=float).reshape(-1, len(d["candidates"]["params"])),
            candidates=CandidateSet.from_json(d["candidates"]),
            orientation=Orientation(d["orientation"]),
            range_cap=float(d["H"]),
        )


def build_table(fns, orientation, range_cap) -> PerformanceTable:
    """Tabulate all functions over the candidate set, dropping duplicate columns.

    Duplicate columns (identical joint behavior) keep the smallest
    representative parameter.
    """
    fns = list(fns)
    range_cap = float(range_cap)
    for i, f in enumerate(fns):
        if min(f.values) < 0 or max(f.values) > range_cap:
            raise RangeError(f"instance {i} has a value outside [0, {range_cap}]")
    cands = extract_candidates(fns)
    reps = np.array(cands.params)
    full = np.vstack([f.eval_many(reps) for f in fns])
    keep: list[int] = []
    seen: dict[bytes, int] = {}
    for j in range(full.shape[1]):
        key = full[:, j].tobytes()
        if key not in seen:
            seen[key] = j
            keep.append(j)
    kept_params = tuple(reps[j] for j in keep)
    return PerformanceTable(
        utilities=full[:, keep],
        candidates=CandidateSet(kept_params, len(kept_params)),
        orientation=Orientation(orientation),
        range_cap=range_cap,
    )
