"""Exact tree-size-versus-parameter tracing over rho in [0, 1].

One branch-and-bound run is replayed at a probe parameter while every
branching decision records its candidate score lines. Each score is linear in
rho, so the set of rho where every recorded argmax (with the lowest-index tie
rule) is unchanged is an interval with rational endpoints; on it the whole run
-- hence the tree size -- is certified constant. The tracer probes, certifies,
and recurses on the uncovered remainder until [0, 1] is covered.

Endpoints are kept as exact ``Fraction``s. When a certified boundary is
converted to a float breakpoint, it is rounded so that float comparisons
against the breakpoint agree with exact comparisons against the boundary for
every representable float; eval therefore matches ``bnb_run`` at any float
query point, not merely away from breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..errors import CapacityError
from ..piecewise import PiecewiseConstantFn, canonicalize
from .bnb import BnbStatus, LpCache, bnb_run
from .instances import IpInstance

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass
class _Seg:
    lo: Fraction
    hi: Fraction
    lo_open: bool
    hi_open: bool
    value: int
    capped: bool


def dual_trace(instance: IpInstance, node_cap: int, piece_cap: int) -> PiecewiseConstantFn:
    """Exact piecewise-constant tree size of ``bnb_run`` over rho in [0, 1].

    Pieces produced under a node-cap-limited run are flagged in the returned
    function's ``piece_capped`` metadata. Raises ``CapacityError`` when more
    than ``piece_cap`` distinct-value pieces are certified.
    """
    if node_cap < 1 or piece_cap < 1:
        raise ValueError("node_cap and piece_cap must be >= 1")
    cache = LpCache(instance)
    segments: list[_Seg] = []
    gaps: list[tuple[Fraction, Fraction, bool, bool]] = [(_ZERO, _ONE, False, False)]

    while gaps:
        lo, hi, lo_open, hi_open = gaps.pop()
        probe = _float_in(lo, hi, lo_open, hi_open)
        if probe is None:
            _absorb_empty_gap(segments, lo, hi, lo_open, hi_open)
            continue
        recorder: list = []
        result = bnb_run(instance, probe, node_cap, cache=cache, recorder=recorder)
        vlo, vhi, vlo_open, vhi_open = _validity_interval(recorder, probe, lo, hi, lo_open, hi_open)
        seg = _Seg(vlo, vhi, vlo_open, vhi_open, result.tree_size, result.status is BnbStatus.NODE_CAP_HIT)
        _insert_segment(segments, seg)
        if _distinct_piece_count(segments) > piece_cap:
            covered = float(sum(s.hi - s.lo for s in segments))
            raise CapacityError(
                f"piece cap {piece_cap} exceeded with {covered:.6f} of the domain certified"
            )
        for gap in (_gap_between(lo, lo_open, vlo, not vlo_open), _gap_between(vhi, not vhi_open, hi, hi_open)):
            if gap is not None:
                gaps.append(gap)

    segments.sort(key=lambda s: (s.lo, s.hi))
    return _assemble(segments)


def _float_in(lo: Fraction, hi: Fraction, lo_open: bool, hi_open: bool) -> float | None:
    """Some float strictly inside the rational interval, or None if none exists."""

    def ok(f: float) -> bool:
        q = Fraction(f)
        if q < lo or (lo_open and q == lo):
            return False
        if q > hi or (hi_open and q == hi):
            return False
        return True

    mid = float((lo + hi) / 2)
    for cand in (mid, math.nextafter(mid, math.inf), math.nextafter(mid, -math.inf)):
        if ok(cand):
            return cand
    f = float(lo)
    for _ in range(4):  # walk up from the lower end
        if ok(f):
            return f
        f = math.nextafter(f, math.inf)
    return None


def _validity_interval(recorder, probe: float, lo, hi, lo_open, hi_open):
    """Largest subinterval of the gap on which every recorded argmax stands.

    The winner of a decision keeps winning against a rival with smaller slope
    for rho up to and including their crossing, and against a rival with
    larger slope strictly beyond the crossing (ties go to the smaller slope,
    then the lower index -- mirroring the branching rule exactly).
    """
    vlo, vhi = lo, hi
    vlo_open, vhi_open = lo_open, hi_open
    rho = Fraction(probe)
    for lines, pos in recorder:
        _, a_win, b_win = lines[pos]
        alpha_w, beta_w = Fraction(a_win), Fraction(b_win)
        for q, (_, a, b) in enumerate(lines):
            if q == pos:
                continue
            da = alpha_w - Fraction(a)
            db = beta_w - Fraction(b)
            if db == 0:
                # parallel lines: the comparison is rho-independent
                if not (da > 0 or (da == 0 and pos < q)):
                    raise AssertionError("recorded argmax inconsistent with its own lines")
                continue
            crossing = -da / db
            if db > 0:
                # winner has the larger slope: it wins strictly beyond the crossing
                if crossing > vlo or (crossing == vlo and not vlo_open):
                    vlo, vlo_open = crossing, True
            else:
                # winner has the smaller slope: it keeps the crossing point
                if crossing < vhi:
                    vhi, vhi_open = crossing, False
    if not (vlo < rho < vhi or (rho == vlo and not vlo_open) or (rho == vhi and not vhi_open)):
        raise AssertionError("probe fell outside its own certified interval")
    return vlo, vhi, vlo_open, vhi_open


def _gap_between(lo, lo_open, hi, hi_open):
    if lo > hi:
        return None
    if lo == hi and (lo_open or hi_open):
        return None
    return (lo, hi, lo_open, hi_open)


def _insert_segment(segments: list[_Seg], seg: _Seg) -> None:
    segments.append(seg)
    segments.sort(key=lambda s: (s.lo, s.hi))
    merged: list[_Seg] = []
    for s in segments:
        if merged and _mergeable(merged[-1], s):
            prev = merged[-1]
            prev.hi, prev.hi_open = s.hi, s.hi_open
            prev.capped = prev.capped or s.capped
        else:
            merged.append(s)
    segments[:] = merged


def _mergeable(a: _Seg, b: _Seg) -> bool:
    if a.value != b.value:
        return False
    if a.hi != b.lo:
        return False
    return not (a.hi_open and b.lo_open)  # the shared point must belong to one side


def _distinct_piece_count(segments: list[_Seg]) -> int:
    count = 0
    prev_value = None
    for s in sorted(segments, key=lambda s: (s.lo, s.hi)):
        if prev_value is None or s.value != prev_value:
            count += 1
        prev_value = s.value
    return count


def _absorb_empty_gap(segments: list[_Seg], lo, hi, lo_open, hi_open) -> None:
    """Close a gap containing no float by donating it to an adjacent segment.

    No representable query can land in such a gap, so which neighbor takes it
    is unobservable through eval.
    """
    for s in segments:
        if s.hi == lo and (not s.hi_open or not lo_open):
            s.hi, s.hi_open = hi, hi_open
            return
        if s.lo == hi and (not s.lo_open or not hi_open):
            s.lo, s.lo_open = lo, lo_open
            return
    raise AssertionError("gap without floats has no adjacent certified segment")


def _ceil_float(x: Fraction, strict: bool) -> float:
    """Smallest float f with Fraction(f) >= x (or > x when strict)."""
    f = float(x)
    q = Fraction(f)
    if q < x or (strict and q == x):
        return math.nextafter(f, math.inf)
    g = math.nextafter(f, -math.inf)
    if Fraction(g) > x or (not strict and Fraction(g) == x):
        return g
    return f


def _assemble(segments: list[_Seg]) -> PiecewiseConstantFn:
    if not segments or segments[0].lo != _ZERO or segments[-1].hi != _ONE:
        raise AssertionError("certified segments do not cover [0, 1]")
    breakpoints: list[float] = []
    values: list[float] = [float(segments[0].value)]
    capped: list[bool] = [segments[0].capped]
    for prev, cur in zip(segments[:-1], segments[1:]):
        if prev.hi != cur.lo:
            raise AssertionError("certified segments are not contiguous")
        if cur.value == prev.value:
            values[-1] = float(prev.value)
            capped[-1] = capped[-1] or cur.capped
            continue
        # The boundary point belongs to whichever side is closed there; pick
        # the float breakpoint so that [b, .) ownership matches for all floats.
        bp = _ceil_float(prev.hi, strict=not prev.hi_open)
        if not 0.0 < bp < 1.0:
            raise AssertionError("breakpoint escaped the open domain")
        breakpoints.append(bp)
        values.append(float(cur.value))
        capped.append(cur.capped)
    fn = PiecewiseConstantFn(0.0, 1.0, tuple(breakpoints), tuple(values), tuple(capped))
    return canonicalize(fn)
