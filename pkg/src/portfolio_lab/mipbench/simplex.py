"""Dense primal simplex for box-constrained LPs with Bland's anti-cycling rule.

Solves  max c.x  s.t.  A x <= b,  lo <= x <= hi  with all bounds finite.
Variables fixed by equal bounds are substituted out before the tableau is
built, which keeps branch-and-bound child LPs small as variables get fixed.

The pivot loop runs as a single fused-tableau kernel; when numba is available
it is JIT-compiled, otherwise the same code runs as plain Python. Both paths
execute the identical operation sequence, so results are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import SolverError

ENTER_TOL = 1e-9
PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
_MAX_PIVOTS = 20000

# kernel exit codes
_OPTIMAL = 0
_UNBOUNDED_CODE = 1
_INFEASIBLE_CODE = 2
_TINY_PIVOT_CODE = 3
_STALLED_CODE = 4


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    """Outcome of one LP relaxation solve."""

    status: LpStatus
    x: np.ndarray | None
    objective: float

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "x": None if self.x is None else [float(v) for v in self.x],
            "objective": self.objective,
        }


def lp_solve(instance, lo=None, hi=None) -> LpResult:
    """Solve the LP relaxation of ``instance`` under optional tightened bounds.

    ``lo``/``hi`` default to the instance's own variable bounds; branch-and-bound
    passes per-node tightenings. Infeasibility is reported in the status, not
    raised.
    """
    if lo is None:
        lo = instance.lo
    if hi is None:
        hi = instance.hi
    return solve_box_lp(instance.c, instance.A, instance.b, lo, hi)


def solve_box_lp(c, A, b, lo, hi) -> LpResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        return LpResult(LpStatus.INFEASIBLE, None, float("-inf"))

    free = lo < hi
    # After the shift x = lo + y the free part satisfies A_f y <= b - A lo.
    rhs_shift = b - A @ lo
    if not free.any():
        if np.all(rhs_shift >= -FEAS_TOL):
            return LpResult(LpStatus.OPTIMAL, lo.copy(), float(c @ lo))
        return LpResult(LpStatus.INFEASIBLE, None, float("-inf"))

    A_f = A[:, free]
    u = (hi - lo)[free]

    # Rows with no free coefficients are either redundant or already violated.
    nz = np.abs(A_f).max(axis=1) > 0 if A_f.shape[0] else np.zeros(0, dtype=bool)
    if np.any(rhs_shift[~nz] < -FEAS_TOL):
        return LpResult(LpStatus.INFEASIBLE, None, float("-inf"))

    code, y = _simplex_standard(c[free], A_f[nz], rhs_shift[nz], u)
    if code == _INFEASIBLE_CODE:
        return LpResult(LpStatus.INFEASIBLE, None, float("-inf"))
    if code == _UNBOUNDED_CODE:
        return LpResult(LpStatus.UNBOUNDED, None, float("inf"))
    if code == _TINY_PIVOT_CODE:
        raise SolverError("no pivot above 1e-10 in the entering column")
    if code == _STALLED_CODE:
        raise SolverError("pivot limit exceeded")
    x = lo.astype(float).copy()
    x[free] += y
    return LpResult(LpStatus.OPTIMAL, x, float(c @ x))


def _simplex_standard(c, A, b, u):
    """Max c.y s.t. A y <= b, 0 <= y <= u via a two-phase fused tableau."""
    nf = c.shape[0]
    m = A.shape[0] + nf
    neg = np.concatenate([b < 0, np.zeros(nf, dtype=bool)])
    n_art = int(neg.sum())
    ncols = nf + m + n_art

    # Fused matrix: m constraint rows + phase-II objective row + phase-I row;
    # the final column is the right-hand side.
    T = np.zeros((m + 2, ncols + 1))
    T[: A.shape[0], :nf] = A
    idx = np.arange(nf)
    T[A.shape[0] + idx, idx] = 1.0  # upper-bound rows y_i <= u_i
    T[np.arange(m), nf + np.arange(m)] = 1.0  # slacks
    T[: A.shape[0], ncols] = b
    T[A.shape[0] + idx, ncols] = u
    basis = nf + np.arange(m)

    if n_art:
        rows = np.flatnonzero(neg)
        T[rows, :] *= -1.0  # whole row including the rhs column
        T[rows, nf + m + np.arange(n_art)] = 1.0
        basis[rows] = nf + m + np.arange(n_art)
        T[m + 1, : ncols] = T[rows, :ncols].sum(axis=0)
        T[m + 1, nf + m :] = 0.0  # artificial columns price out to zero

    T[m, :nf] = c
    code = _kernel(T, basis, nf, m, ncols, n_art)
    if code != _OPTIMAL:
        return code, None
    y = np.zeros(nf)
    for i in range(m):
        if basis[i] < nf:
            y[basis[i]] = max(T[i, ncols], 0.0)
    return _OPTIMAL, y


def _kernel_impl(T, basis, nf, m, ncols, n_art):
    """Two-phase Bland pivoting on the fused tableau. Returns an exit code."""
    # Phase I: minimize the artificial sum (tracked on row m+1).
    if n_art > 0:
        code = _phase(T, basis, m + 1, ncols, ncols)
        if code != _OPTIMAL:
            return _TINY_PIVOT_CODE if code == _TINY_PIVOT_CODE else _STALLED_CODE
        art_level = 0.0
        for i in range(m):
            if basis[i] >= nf + m:
                art_level += T[i, ncols]
        if art_level > FEAS_TOL:
            return _INFEASIBLE_CODE
        # Drive zero-level artificial basics out where a real pivot exists.
        for i in range(m):
            if basis[i] >= nf + m:
                piv_col = -1
                for j in range(nf + m):
                    if T[i, j] > PIVOT_TOL or T[i, j] < -PIVOT_TOL:
                        piv_col = j
                        break
                if piv_col >= 0:
                    _do_pivot(T, basis, i, piv_col, ncols)
                else:
                    # redundant row: blank it so it can never pivot again
                    for j in range(ncols + 1):
                        T[i, j] = 0.0
        # Forbid artificial columns from re-entering.
        for i in range(m + 2):
            for j in range(nf + m, ncols):
                T[i, j] = 0.0
        # Rebuild the phase-II reduced costs for the current basis.
        for i in range(m):
            bj = basis[i]
            if bj < nf + m:
                cb = T[m, bj]
                if cb != 0.0:
                    for j in range(ncols + 1):
                        T[m, j] -= cb * T[i, j]
    return _phase(T, basis, m, nf + m, ncols)


def _phase_impl(T, basis, obj_row, active_cols, ncols):
    """Bland pivoting against one objective row. Returns an exit code."""
    m = basis.shape[0]
    for _ in range(_MAX_PIVOTS):
        enter = -1
        for j in range(active_cols):
            if T[obj_row, j] > ENTER_TOL:
                enter = j
                break
        if enter < 0:
            return _OPTIMAL
        leave = -1
        leave_var = 0
        best_ratio = np.inf
        any_positive = False
        for i in range(m):
            a = T[i, enter]
            if a > PIVOT_TOL:
                r = T[i, ncols]
                if r < 0.0:
                    r = 0.0
                ratio = r / a
                if ratio < best_ratio - 1e-12 or (
                    ratio <= best_ratio + 1e-12 and (leave < 0 or basis[i] < leave_var)
                ):
                    if ratio < best_ratio:
                        best_ratio = ratio
                    leave = i
                    leave_var = basis[i]
            elif a > 0.0:
                any_positive = True
        if leave < 0:
            if any_positive:
                return _TINY_PIVOT_CODE
            return _UNBOUNDED_CODE
        _do_pivot(T, basis, leave, enter, ncols)
    return _STALLED_CODE


def _do_pivot_impl(T, basis, r, j, ncols):
    p = T[r, j]
    inv = 1.0 / p
    for col in range(ncols + 1):
        T[r, col] *= inv
    T[r, j] = 1.0
    for i in range(T.shape[0]):
        if i == r:
            continue
        f = T[i, j]
        if f != 0.0:
            for col in range(ncols + 1):
                T[i, col] -= f * T[r, col]
            T[i, j] = 0.0
    basis[r] = j


try:  # pragma: no cover - exercised implicitly by every LP solve
    from numba import njit

    _do_pivot = njit(cache=True)(_do_pivot_impl)
    _phase = njit(cache=True)(_phase_impl)
    _kernel = njit(cache=True)(_kernel_impl)
except Exception:  # numba unavailable: same arithmetic, plain Python speed
    _do_pivot = _do_pivot_impl
    _phase = _phase_impl
    _kernel = _kernel_impl
