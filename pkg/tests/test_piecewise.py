import json

import numpy as np
import pytest

from portfolio_lab.errors import DomainError, RangeError
from portfolio_lab.piecewise import (
    CandidateSet,
    Orientation,
    PerformanceTable,
    PiecewiseConstantFn,
    build_table,
    canonicalize,
    extract_candidates,
)


def random_fn(rng, max_pieces=6, lo=0.0, hi=1.0):
    n_bp = int(rng.integers(0, max_pieces))
    bps = np.sort(rng.uniform(lo + 1e-6, hi - 1e-6, size=n_bp))
    bps = [float(b) for i, b in enumerate(bps) if i == 0 or b - bps[i - 1] > 1e-9]
    values = [float(v) for v in rng.integers(0, 50, size=len(bps) + 1)]
    return PiecewiseConstantFn(lo, hi, tuple(bps), tuple(values))


class TestEval:
    def test_constant_function(self):
        f = PiecewiseConstantFn(0.0, 1.0, (), (5.0,))
        assert f.eval(0.3) == 5.0

    def test_breakpoint_belongs_to_right_piece(self):
        f = PiecewiseConstantFn(0.0, 1.0, (0.5,), (1.0, 2.0))
        assert f.eval(0.5) == 2.0
        assert f.eval(0.49999) == 1.0
        assert f.eval(1.0) == 2.0

    def test_domain_error(self):
        f = PiecewiseConstantFn(0.0, 1.0, (), (5.0,))
        with pytest.raises(DomainError):
            f.eval(1.5)
        with pytest.raises(DomainError):
            f.eval(-0.1)

    def test_eval_many_matches_eval(self):
        rng = np.random.default_rng(3)
        f = random_fn(rng)
        xs = rng.uniform(0, 1, size=200)
        assert np.array_equal(f.eval_many(xs), np.array([f.eval(x) for x in xs]))


class TestCanonicalize:
    def test_adjacent_equal_merge(self):
        f = PiecewiseConstantFn(0.0, 1.0, (0.3, 0.6), (2.0, 2.0, 4.0))
        g = canonicalize(f)
        assert g.breakpoints == (0.6,)
        assert g.values == (2.0, 4.0)

    def test_idempotent(self):
        f = PiecewiseConstantFn(0.0, 1.0, (0.25, 0.5), (1.0, 3.0, 2.0))
        assert canonicalize(f) == canonicalize(canonicalize(f))

    def test_eval_preserving_on_random_functions(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            bps = tuple(sorted(set(float(b) for b in rng.uniform(0.05, 0.95, size=4))))
            values = tuple(float(v) for v in rng.integers(0, 3, size=len(bps) + 1))
            f = PiecewiseConstantFn(0.0, 1.0, bps, values)
            g = canonicalize(f)
            for rho in rng.uniform(0, 1, size=1000):
                assert g.eval(float(rho)) == f.eval(float(rho))

    def test_merges_capped_flags(self):
        f = PiecewiseConstantFn(0.0, 1.0, (0.4,), (2.0, 2.0), piece_capped=(False, True))
        g = canonicalize(f)
        assert g.values == (2.0,)
        assert g.piece_capped == (True,)


class TestInvariants:
    def test_breakpoints_must_increase(self):
        with pytest.raises(ValueError):
            PiecewiseConstantFn(0.0, 1.0, (0.5, 0.5), (1.0, 2.0, 3.0))

    def test_breakpoints_inside_domain(self):
        with pytest.raises(ValueError):
            PiecewiseConstantFn(0.0, 1.0, (1.0,), (1.0, 2.0))

    def test_values_length(self):
        with pytest.raises(ValueError):
            PiecewiseConstantFn(0.0, 1.0, (0.5,), (1.0,))


class TestExtractCandidates:
    def test_two_functions_midpoints(self):
        f1 = PiecewiseConstantFn(0.0, 1.0, (0.3,), (1.0, 2.0))
        f2 = PiecewiseConstantFn(0.0, 1.0, (0.6,), (5.0, 7.0))
        cands = extract_candidates([f1, f2])
        assert cands.params == ((0.0 + 0.3) / 2, (0.3 + 0.6) / 2, (0.6 + 1.0) / 2)
        assert cands.params == pytest.approx((0.15, 0.45, 0.8))
        assert cands.source_interval_count == 3

    def test_constant_function_single_midpoint(self):
        f = PiecewiseConstantFn(0.0, 1.0, (), (4.0,))
        assert extract_candidates([f]).params == (0.5,)

    def test_grid_completeness(self):
        rng = np.random.default_rng(5)
        fns = [random_fn(rng) for _ in range(5)]
        cands = extract_candidates(fns)
        columns = {
            tuple(f.eval(p) for f in fns) for p in cands.params
        }
        for rho in np.linspace(0.0, 1.0, 10001):
            vec = tuple(f.eval(float(rho)) for f in fns)
            assert vec in columns

    def test_candidate_count_bound(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            fns = [random_fn(rng) for _ in range(int(rng.integers(1, 6)))]
            cands = extract_candidates(fns)
            assert len(cands.params) <= sum(f.piece_count - 1 for f in fns) + 1

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            extract_candidates([])

    def test_mismatched_domains_rejected(self):
        f1 = PiecewiseConstantFn(0.0, 1.0, (), (1.0,))
        f2 = PiecewiseConstantFn(0.0, 2.0, (), (1.0,))
        with pytest.raises(ValueError):
            extract_candidates([f1, f2])


class TestBuildTable:
    def test_identical_constants_collapse_to_one_column(self):
        f = PiecewiseConstantFn(0.0, 1.0, (), (3.0,))
        table = build_table([f, f], Orientation.MAXIMIZE, 5.0)
        assert table.utilities.shape == (2, 1)
        assert table.utilities.tolist() == [[3.0], [3.0]]

    def test_threshold_indicator_family_reproduces_zero_one_table(self):
        # duals of u_rho(z) = 1{z <= rho} for instances z in {0.25, 0.75}:
        # as functions of rho they step from 0 to 1 at z.
        fns = [
            PiecewiseConstantFn(0.0, 1.0, (z,), (0.0, 1.0)) for z in (0.25, 0.75)
        ]
        table = build_table(fns, Orientation.MAXIMIZE, 1.0)
        assert sorted(set(map(tuple, table.utilities.T.tolist()))) == [
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
        ]

    def test_entries_match_direct_reevaluation(self):
        rng = np.random.default_rng(23)
        fns = [random_fn(rng) for _ in range(6)]
        table = build_table(fns, Orientation.MINIMIZE, 50.0)
        for j, rho in enumerate(table.candidates.params):
            for i, f in enumerate(fns):
                assert table.utilities[i, j] == f.eval(rho)

    def test_no_duplicate_columns_and_smallest_representative_kept(self):
        f = PiecewiseConstantFn(0.0, 1.0, (0.2, 0.8), (1.0, 1.0, 2.0))
        g = PiecewiseConstantFn(0.0, 1.0, (0.2, 0.8), (3.0, 3.0, 4.0))
        table = build_table([f, g], Orientation.MAXIMIZE, 4.0)
        cols = [tuple(col) for col in table.utilities.T]
        assert len(cols) == len(set(cols))
        # intervals [0,0.2) and [0.2,0.8) behave identically: the kept
        # representative is the smaller one, the midpoint of [0, 0.2)
        assert table.candidates.params[0] == 0.1

    def test_range_error_names_instance(self):
        f_ok = PiecewiseConstantFn(0.0, 1.0, (), (1.0,))
        f_bad = PiecewiseConstantFn(0.0, 1.0, (), (9.0,))
        with pytest.raises(RangeError, match="instance 1"):
            build_table([f_ok, f_bad], Orientation.MAXIMIZE, 5.0)


class TestJson:
    def test_fn_roundtrip_bit_exact(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            f = random_fn(rng)
            blob = json.dumps(f.to_json())
            g = PiecewiseConstantFn.from_json(json.loads(blob))
            assert g == PiecewiseConstantFn(
                f.domain_lo, f.domain_hi, f.breakpoints, f.values
            )
            assert json.dumps(g.to_json()) == blob

    def test_table_roundtrip_bit_exact(self):
        rng = np.random.default_rng(37)
        fns = [random_fn(rng) for _ in range(4)]
        table = build_table(fns, Orientation.MINIMIZE, 50.0)
        blob = json.dumps(table.to_json())
        back = PerformanceTable.from_json(json.loads(blob))
        assert np.array_equal(back.utilities, table.utilities)
        assert back.candidates == table.candidates
        assert back.orientation == table.orientation
        assert back.range_cap == table.range_cap
        assert json.dumps(back.to_json()) == blob

    def test_candidate_set_validation(self):
        with pytest.raises(ValueError):
            CandidateSet((0.5, 0.2), 2)
        with pytest.raises(ValueError):
            CandidateSet((0.2, 0.5), 3)
