"""Parameterized branch-and-bound over box-bounded IPs.

The variable selection policy scores each fractional integer variable i by

    score_i(rho) = (1 - rho) * min(d_minus, d_plus) + rho * max(d_minus, d_plus)

where d_minus/d_plus are the LP objective drops of the two children
(strong branching: both child LPs are solved for every candidate). The score
is linear in rho, score_i(rho) = alpha_i + beta_i * rho with
alpha_i = min(d-, d+) and beta_i = max - min >= 0; the dual tracer consumes
these lines. Argmax comparisons are resolved exactly (rational fallback) so
that the winner is a well-defined function of rho with no float-order noise.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from ..errors import SolverError
from .instances import FRACTIONAL_TOL, IpInstance
from .simplex import LpResult, LpStatus, solve_box_lp

INFEASIBLE_DELTA = 1e18
PRUNE_TOL = 1e-9
_BOUND_QUANTUM = 1e-9


class BnbStatus(str, Enum):
    SOLVED = "solved"
    NODE_CAP_HIT = "node_cap_hit"


@dataclass(frozen=True)
class BnbResult:
    """One branch-and-bound run; tree_size counts nodes whose LP was solved."""

    tree_size: int
    status: BnbStatus
    objective: float
    x: np.ndarray | None

    def to_json(self) -> dict:
        return {
            "tree_size": self.tree_size,
            "status": self.status.value,
            "objective": self.objective,
            "x": None if self.x is None else [float(v) for v in self.x],
        }


class LpCache:
    """Memo of LP results keyed by the bound overrides of a node.

    The LP relaxation is a pure function of (instance, bounds), so sharing one
    cache across runs at different rho values (or across repeated runs) changes
    nothing observable and avoids re-solving identical node LPs.
    """

    def __init__(self, instance: IpInstance):
        self.instance = instance
        self._memo: dict[tuple, LpResult] = {}

    def solve(self, overrides: tuple) -> LpResult:
        res = self._memo.get(overrides)
        if res is None:
            lo = self.instance.lo.copy()
            hi = self.instance.hi.copy()
            for i, lo_i, hi_i in overrides:
                lo[i] = lo_i
                hi[i] = hi_i
            res = solve_box_lp(self.instance.c, self.instance.A, self.instance.b, lo, hi)
            self._memo[overrides] = res
        return res


def _child_overrides(overrides: tuple, i: int, lo_i: float, hi_i: float) -> tuple:
    kept = tuple(o for o in overrides if o[0] != i)
    prev = next((o for o in overrides if o[0] == i), None)
    if prev is not None:
        lo_i = max(lo_i, prev[1])
        hi_i = min(hi_i, prev[2])
    return tuple(sorted(kept + ((i, lo_i, hi_i),)))


def _fractional_vars(instance: IpInstance, x: np.ndarray) -> list[int]:
    return [i for i in instance.I if abs(x[i] - round(x[i])) > FRACTIONAL_TOL]


def _compare_lines(alpha_a, beta_a, alpha_b, beta_b, rho) -> int:
    """Exact sign of (alpha_a + beta_a*rho) - (alpha_b + beta_b*rho)."""
    da = alpha_a - alpha_b
    db = beta_a - beta_b
    d = da + db * rho
    margin = 1e-12 * (abs(da) + abs(db) * rho + 1e-300)
    if d > margin:
        return 1
    if d < -margin:
        return -1
    exact = Fraction(alpha_a) - Fraction(alpha_b) + (Fraction(beta_a) - Fraction(beta_b)) * Fraction(rho)
    if exact > 0:
        return 1
    if exact < 0:
        return -1
    return 0


def _choose_branch_var(lines: list[tuple[int, float, float]], rho: float) -> int:
    """Position of the argmax line at rho.

    Exact score ties resolve to the smaller slope, then to the lower variable
    index. The smaller-slope rule makes the winner left-continuous in rho
    (at a crossing the left-side winner keeps the point), so the traced tree
    size never changes value at the right end of the domain.
    """
    best = 0
    for pos in range(1, len(lines)):
        _, a, b = lines[pos]
        _, ba, bb = lines[best]
        s = _compare_lines(a, b, ba, bb, rho)
        if s > 0 or (s == 0 and b < bb):
            best = pos
    return best


def branch_scores(instance: IpInstance, rho: float, overrides: tuple = (), cache: LpCache | None = None):
    """Strong-branching scores for every fractional integer variable at a node.

    Returns a list of (variable index, score at rho, intercept, slope); the
    intercept/slope pair is the score line alpha_i + beta_i * rho.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if cache is None:
        cache = LpCache(instance)
    node = cache.solve(overrides)
    if node.status is not LpStatus.OPTIMAL:
        raise ValueError("node LP is not optimal")
    lines = _score_lines(instance, node, overrides, cache)
    if not lines:
        raise ValueError("no fractional integer variable at this node")
    return [(i, a + b * rho, a, b) for i, a, b in lines]


def _score_lines(instance, node: LpResult, overrides: tuple, cache: LpCache):
    """Score lines (var, alpha, beta) for all fractional vars, ascending index."""
    x = node.x
    out = []
    for i in _fractional_vars(instance, x):
        fl = float(np.floor(x[i]))
        down = cache.solve(_child_overrides(overrides, i, instance.lo[i], fl))
        up = cache.solve(_child_overrides(overrides, i, fl + 1.0, instance.hi[i]))
        d_down = node.objective - down.objective if down.status is LpStatus.OPTIMAL else INFEASIBLE_DELTA
        d_up = node.objective - up.objective if up.status is LpStatus.OPTIMAL else INFEASIBLE_DELTA
        alpha = min(d_down, d_up)
        beta = max(d_down, d_up) - alpha
        out.append((i, alpha, beta))
    return out


def bnb_run(
    instance: IpInstance,
    rho: float,
    node_cap: int,
    cache: LpCache | None = None,
    recorder: list | None = None,
) -> BnbResult:
    """Solve the IP by best-bound branch-and-bound with the rho-scored policy.

    Node selection pops the open node with the largest LP bound (bounds
    quantized to 1e-9; FIFO within a quantum). Every popped node counts toward
    tree_size. When ``recorder`` is a list, each branching decision appends
    (score lines, chosen position) for the dual tracer.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    if node_cap < 1:
        raise ValueError("node_cap must be >= 1")
    if cache is None:
        cache = LpCache(instance)

    root = cache.solve(())
    seq = 0
    heap: list[tuple[int, int, tuple, LpResult]] = []

    def push(overrides, res):
        nonlocal seq
        if res.status is LpStatus.OPTIMAL and math.isfinite(res.objective):
            key = -round(res.objective / _BOUND_QUANTUM)
        else:
            key = 2**62  # infeasible nodes sort last
        heapq.heappush(heap, (key, seq, overrides, res))
        seq += 1

    push((), root)
    tree_size = 0
    inc_obj = float("-inf")
    inc_x = None
    capped = False

    while heap:
        if tree_size >= node_cap:
            capped = True
            break
        _, _, overrides, node = heapq.heappop(heap)
        tree_size += 1
        if node.status is not LpStatus.OPTIMAL:
            continue
        if node.objective <= inc_obj + PRUNE_TOL:
            continue
        x = node.x
        frac = _fractional_vars(instance, x)
        if not frac:
            if node.objective > inc_obj:
                inc_obj = node.objective
                inc_x = x
            continue
        if tree_size >= node_cap:
            capped = True
            break  # children would never be expanded
        lines = _score_lines(instance, node, overrides, cache)
        pos = _choose_branch_var(lines, rho)
        if recorder is not None:
            recorder.append((tuple(lines), pos))
        i = lines[pos][0]
        fl = float(np.floor(x[i]))
        down_over = _child_overrides(overrides, i, instance.lo[i], fl)
        up_over = _child_overrides(overrides, i, fl + 1.0, instance.hi[i])
        push(down_over, cache.solve(down_over))
        push(up_over, cache.solve(up_over))

    status = BnbStatus.NODE_CAP_HIT if capped else BnbStatus.SOLVED
    return BnbResult(tree_size, status, inc_obj, inc_x)
