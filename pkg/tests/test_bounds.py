import math

import numpy as np
import pytest

from portfolio_lab.bounds import (
    BoundQuery,
    LowerBoundFamily,
    MultiClassFamily,
    end_to_end_bound,
    generalization_bound,
    lb_construct,
    lb_gap_experiment,
    lb_verify_shattering,
    natarajan_bound,
    pdim_upper_bound,
    verify_multiclass_shatter,
)
from portfolio_lab.errors import CapacityError


def q(**kw):
    base = dict(d_bar=2, kappa=2, t=2, N=100, H=1.0, delta=0.05)
    base.update(kw)
    return BoundQuery(**base)


class TestPdimUpperBound:
    def test_worked_value(self):
        assert pdim_upper_bound(q()) == pytest.approx(4 * math.log2(5) + 2, abs=1e-12)

    def test_t_one_drops_log_term(self):
        assert pdim_upper_bound(q(t=1)) == pytest.approx(4 * math.log2(5))

    def test_doubling_t_adds_kappa(self):
        for kappa in (1, 2, 5):
            lo = pdim_upper_bound(q(kappa=kappa, t=4))
            hi = pdim_upper_bound(q(kappa=kappa, t=8))
            assert hi - lo == pytest.approx(kappa)

    def test_monotonicity_matrix(self):
        base = q(d_bar=3, kappa=4, t=5, N=50)
        v = pdim_upper_bound(base)
        assert pdim_upper_bound(q(d_bar=4, kappa=4, t=5, N=50)) >= v
        assert pdim_upper_bound(q(d_bar=2, kappa=4, t=5, N=50)) <= v
        assert pdim_upper_bound(q(d_bar=3, kappa=5, t=5, N=50)) >= v
        assert pdim_upper_bound(q(d_bar=3, kappa=3, t=5, N=50)) <= v
        assert pdim_upper_bound(q(d_bar=3, kappa=4, t=6, N=50)) >= v
        assert pdim_upper_bound(q(d_bar=3, kappa=4, t=4, N=50)) <= v


class TestGeneralizationBound:
    def test_zero_range_gives_zero(self):
        assert generalization_bound(q(H=0.0), 10.0) == 0.0

    def test_quadrupling_n_halves(self):
        b1 = generalization_bound(q(N=100), 7.0)
        b2 = generalization_bound(q(N=400), 7.0)
        assert b2 == pytest.approx(b1 / 2)

    def test_monotone_in_pdim_and_delta(self):
        assert generalization_bound(q(), 8.0) >= generalization_bound(q(), 4.0)
        assert generalization_bound(q(delta=0.01), 4.0) >= generalization_bound(q(delta=0.1), 4.0)


class TestEndToEnd:
    def test_zero_slacks_reduce_to_generalization_term(self):
        query = q(alpha=1.0, beta=0.0, epsilon=0.0)
        assert end_to_end_bound(query) == pytest.approx(
            generalization_bound(query, pdim_upper_bound(query))
        )

    def test_epsilon_beta_additive(self):
        query = q(alpha=1 - 1 / math.e, beta=0.25, epsilon=0.5)
        assert end_to_end_bound(query) == pytest.approx(
            0.75 + generalization_bound(query, pdim_upper_bound(query))
        )

    def test_monotone_decreasing_in_n(self):
        vals = [end_to_end_bound(q(N=n)) for n in (50, 100, 400, 1600)]
        assert vals == sorted(vals, reverse=True)


class TestNatarajanBound:
    def test_linear(self):
        assert natarajan_bound("linear", 3, 4) == 12.0

    def test_tree_degenerate_zero(self):
        assert natarajan_bound("tree", 1, 1, ell=1) == 0.0

    def test_cluster(self):
        assert natarajan_bound("cluster", 2, 2, p=1.0) == pytest.approx(4 * math.log2(4))

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            natarajan_bound("linear", 0, 2)
        with pytest.raises(ValueError):
            natarajan_bound("cluster", 2, 2, p=0.5)


class TestLowerBoundFamily:
    def test_selector_values_match_membership(self):
        fam = lb_construct(2)
        assert fam.selector_param({1}, 0.4) == pytest.approx(0.5)
        assert fam.selector_param(set(), 0.4) == pytest.approx(0.25)

    def test_membership_identities_on_shattered_points(self):
        fam = lb_construct(5)
        for i, z in enumerate(fam.shattered_set, start=1):
            with_i = fam.utility(fam.selector_param({i}, z), z)
            without_i = fam.utility(fam.selector_param(set(), z), z)
            assert with_i == 1.0
            assert without_i == 0.0

    def test_shattering_verified_for_small_kappas(self):
        for kappa in range(2, 13):
            assert lb_verify_shattering(lb_construct(kappa))

    def test_mutated_family_fails(self):
        fam = lb_construct(4)
        broken = LowerBoundFamily(4, fam.shattered_set)
        broken_sel = lambda C, z: fam.selector_param(set(), z)  # ignores C
        object.__setattr__(broken, "selector_param", broken_sel)
        assert not lb_verify_shattering(broken)

    def test_guard(self):
        with pytest.raises(ValueError):
            lb_construct(1)
        fam = LowerBoundFamily(25, tuple(i / 25 for i in range(1, 26)))
        with pytest.raises(CapacityError):
            lb_verify_shattering(fam)


class TestMulticlassShatter:
    def test_single_function_never_shatters(self):
        fam = MultiClassFamily((lambda z: 1,))
        assert not verify_multiclass_shatter(fam, [0.1, 0.5, 0.9], 1)

    def test_theorem_family_projection_dimension_zero(self):
        fam = lb_construct(6)
        proj = fam.multiclass_projection()
        assert not verify_multiclass_shatter(proj, fam.shattered_set, 1)

    def test_hand_built_family_shatters_two_points(self):
        # four functions realizing all (a, b) label pairs on two points
        fns = tuple(
            (lambda a, b: (lambda z: a if z == 0 else b))(a, b)
            for a in (1, 2)
            for b in (3, 4)
        )
        fam = MultiClassFamily(fns)
        assert verify_multiclass_shatter(fam, [0, 1], 2)
        assert verify_multiclass_shatter(fam, [0, 1], 1)

    def test_two_function_family_cannot_shatter_two_points(self):
        fns = (lambda z: 1, lambda z: 2)
        fam = MultiClassFamily(fns)
        assert verify_multiclass_shatter(fam, [0, 1], 1)
        assert not verify_multiclass_shatter(fam, [0, 1], 2)

    def test_capacity_guard(self):
        fns = tuple((lambda i: (lambda z: (z * i) % 7))(i) for i in range(40))
        fam = MultiClassFamily(fns)
        with pytest.raises(CapacityError):
            verify_multiclass_shatter(fam, list(range(40)), 12)


class TestGapExperiment:
    def test_exact_small_case(self):
        # kappa=2, N=2: E[gap] = 0.375 by enumeration of the 16 outcomes
        gap = lb_gap_experiment(2, 2, trials=200_000, seed=3)
        assert gap == pytest.approx(0.375, abs=0.01)

    def test_large_n_gap_vanishes(self):
        gap = lb_gap_experiment(4, 100_000, trials=40, seed=5)
        assert gap < 0.02

    def test_sqrt_kappa_scaling(self):
        g8 = lb_gap_experiment(8, 200, trials=10_000, seed=7)
        g2 = lb_gap_experiment(2, 200, trials=10_000, seed=8)
        assert 1.5 <= g8 / g2 <= 2.5

    def test_monotone_decreasing_in_n(self):
        gaps = [lb_gap_experiment(4, n, trials=10_000, seed=11) for n in (100, 400, 1600, 6400)]
        assert gaps == sorted(gaps, reverse=True)

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            lb_gap_experiment(1, 10, 10, 0)
        with pytest.raises(ValueError):
            lb_gap_experiment(4, 3, 10, 0)
        with pytest.raises(ValueError):
            lb_gap_experiment(4, 10, 0, 0)
