import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochastic_chaining import gaussian_mean as gm
from stochastic_chaining import phase_retrieval as pr
from stochastic_chaining.chain_core import (
    NEG_INF,
    BoundReport,
    CgfSpec,
    ChainDomainError,
    ChainInvariantError,
    ChainLevel,
    ChainSpec,
    TruncationPolicy,
    evaluate_cgf_bound,
    evaluate_kl_bound,
    evaluate_mi_bound,
    evaluate_partition_bound,
    expand_chain,
    legendre_dual,
    legendre_dual_inverse,
    partition_chain,
    with_mi,
)

from oracles import GAUSSIAN_THM1_CONSTANT, gaussian_series, grid_max, grid_min

COMPLETE = TruncationPolicy(tail_majorant="none")


def gaussian_level(k):
    return ChainLevel(k, 3.0 / (2.0 ** (k - 1) + 1.0), mi_upper=0.5 * math.log1p(2.0**k))


def gaussian_window(width):
    return ChainSpec(tuple(gaussian_level(k) for k in range(-width, width + 1)), NEG_INF, TruncationPolicy(max_levels_each_side=width))


levels = st.lists(
    st.tuples(
        st.floats(0, 100, allow_nan=False),
        st.floats(0, 20, allow_nan=False),
    ),
    min_size=1,
    max_size=30,
)


def make_chain(pairs, k0=0):
    return ChainSpec(
        tuple(ChainLevel(k0 + 1 + i, a, mi_upper=b) for i, (a, b) in enumerate(pairs)), k0, COMPLETE
    )


class TestTypes:
    def test_negative_fields_rejected(self):
        with pytest.raises(ChainInvariantError):
            ChainLevel(0, -1.0, 1.0)
        with pytest.raises(ChainInvariantError):
            ChainLevel(0, 1.0, -1e-3)
        with pytest.raises(ChainInvariantError):
            ChainLevel(0, 1.0, 1.0, kl_term=-2.0)

    def test_levels_must_increase(self):
        with pytest.raises(ChainInvariantError):
            ChainSpec((ChainLevel(2, 1, 1), ChainLevel(2, 1, 1)))

    def test_first_level_follows_k_start(self):
        ChainSpec((ChainLevel(4, 1, 1),), k_start=3)
        with pytest.raises(ChainInvariantError):
            ChainSpec((ChainLevel(5, 1, 1),), k_start=3)

    def test_policy_validation(self):
        with pytest.raises(ChainInvariantError):
            TruncationPolicy(abs_tol=0)
        with pytest.raises(ChainInvariantError):
            TruncationPolicy(max_levels_each_side=0)
        with pytest.raises(ChainInvariantError):
            TruncationPolicy(tail_majorant="harmonic")


class TestMiBound:
    def test_single_level(self):
        report = evaluate_mi_bound(ChainSpec((ChainLevel(1, 2.0, 1.0),), 0, COMPLETE))
        assert report.total == pytest.approx(2.0, rel=1e-15)
        assert report.tail_bound == 0.0
        assert report.variant == "mi_form"

    def test_empty_chain(self):
        with pytest.raises(ChainDomainError):
            evaluate_mi_bound(ChainSpec(()))

    def test_missing_mi(self):
        with pytest.raises(ChainDomainError):
            evaluate_mi_bound(ChainSpec((ChainLevel(1, 2.0),), 0))

    def test_gaussian_window_below_13(self):
        report = evaluate_mi_bound(gaussian_window(60))
        assert report.guarantee < 13

    def test_gaussian_series_against_extended_precision(self):
        total, tail = gaussian_series()
        assert float(tail) < 1e-25
        assert float(total) == pytest.approx(GAUSSIAN_THM1_CONSTANT, rel=1e-15)
        report = evaluate_mi_bound(expand_chain(gaussian_level))
        assert report.total == pytest.approx(GAUSSIAN_THM1_CONSTANT, rel=1e-6)
        assert f"{report.total:.6g}" == "12.9086"

    def test_truncation_soundness(self):
        short = evaluate_mi_bound(gaussian_window(60))
        long = evaluate_mi_bound(gaussian_window(200))
        assert 0 < long.total - short.total < short.tail_bound

    def test_total_is_fsum_of_contributions(self):
        report = evaluate_mi_bound(gaussian_window(60))
        assert report.total == math.fsum(c for _, c in report.per_level)

    @given(levels, st.floats(0.01, 100))
    def test_scaling(self, pairs, c):
        base = evaluate_mi_bound(make_chain(pairs)).total
        scaled = evaluate_mi_bound(make_chain([(a * c * c, b) for a, b in pairs])).total
        assert scaled == pytest.approx(c * base, rel=1e-12, abs=1e-300)

    @given(levels, st.floats(1e-6, 100), st.floats(1e-6, 20))
    def test_monotone_in_added_levels(self, pairs, a, b):
        before = evaluate_mi_bound(make_chain(pairs)).total
        after = evaluate_mi_bound(make_chain(pairs + [(a, b)])).total
        assert after > before


class TestTail:
    def test_increasing_terms_give_infinite_tail(self):
        chain = ChainSpec((ChainLevel(1, 1, 1), ChainLevel(2, 4, 1)), 0)
        assert math.isinf(evaluate_mi_bound(chain).tail_bound)

    def test_geometric_tail_value(self):
        # contributions 1, 1/2 -> remaining 1/4 + 1/8 + ... = 1/2
        chain = ChainSpec((ChainLevel(1, 0.5, 1), ChainLevel(2, 0.125, 1)), 0)
        assert evaluate_mi_bound(chain).tail_bound == pytest.approx(0.5)

    def test_zero_tail(self):
        chain = ChainSpec((ChainLevel(1, 1, 0), ChainLevel(2, 1, 0)), 0)
        assert evaluate_mi_bound(chain).tail_bound == 0.0

    def test_expand_reaches_tolerance(self):
        chain = expand_chain(gaussian_level, initial_levels=10)
        report = evaluate_mi_bound(chain)
        assert report.tail_bound <= 1e-10
        assert len(chain.levels) > 21

    def test_expand_respects_max(self):
        chain = expand_chain(gaussian_level, truncation=TruncationPolicy(max_levels_each_side=30))
        assert [lvl.k for lvl in chain.levels] == list(range(-30, 31))

    def test_expand_finite_start(self):
        chain = expand_chain(lambda k: ChainLevel(k, 4.0**-k, 1.0), k_start=-1, initial_levels=4)
        assert chain.levels[0].k == 0
        assert evaluate_mi_bound(chain).tail_bound <= 1e-10


class TestKlBound:
    def test_zero(self):
        chain = ChainSpec((ChainLevel(1, 1, kl_term=0.0), ChainLevel(2, 1, kl_term=0.0)), 0, COMPLETE)
        assert evaluate_kl_bound(chain).total == 0.0

    def test_additive(self):
        chain = ChainSpec((ChainLevel(1, 1, kl_term=0.5), ChainLevel(2, 1, kl_term=0.25)), 0, COMPLETE)
        report = evaluate_kl_bound(chain)
        assert report.total == 0.75
        assert report.variant == "kl_form"

    def test_missing(self):
        chain = ChainSpec((ChainLevel(1, 1, kl_term=0.5), ChainLevel(2, 1)), 0)
        with pytest.raises(ChainDomainError):
            evaluate_kl_bound(chain)


class TestPartitionChain:
    def test_levels(self):
        chain = partition_chain(1.0, 0, 2)
        assert [lvl.k for lvl in chain.levels] == [1, 2]
        assert [lvl.link_dist_sq for lvl in chain.levels] == [2.25, 0.5625]
        assert all(lvl.mi_upper is None for lvl in chain.levels)

    def test_diameter_precondition(self):
        partition_chain(0.5, 1, 3)
        with pytest.raises(ChainDomainError):
            partition_chain(0.5, 2, 3)

    def test_depth_one(self):
        assert len(partition_chain(1.0, 0, 1).levels) == 1

    def test_partition_form_variant(self):
        chain = with_mi(partition_chain(1.0, 0, 3), [1.0, 2.0, 3.0])
        report = evaluate_partition_bound(chain)
        assert report.variant == "partition_form"
        expected = sum(3 * 2.0**-k * math.sqrt(2 * i) for k, i in [(1, 1.0), (2, 2.0), (3, 3.0)])
        assert report.total == pytest.approx(expected, rel=1e-14)

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 20)), min_size=1, max_size=20))
    def test_dominance(self, pairs):
        part = with_mi(partition_chain(1.0, 0, len(pairs)), [b for _, b in pairs])
        chain = ChainSpec(
            tuple(ChainLevel(lvl.k, f * lvl.link_dist_sq, lvl.mi_upper) for lvl, (f, _) in zip(part.levels, pairs)),
            0,
        )
        assert evaluate_mi_bound(chain).total <= evaluate_mi_bound(part).total * (1 + 1e-12)


QUAD = CgfSpec.quadratic()


class TestLegendre:
    def test_quadratic_dual(self):
        assert legendre_dual(QUAD, 1.0) == pytest.approx(0.5, rel=1e-9)
        assert legendre_dual(QUAD, 0.0) == 0.0

    def test_scaled_quadratic_against_grid(self):
        cgf = CgfSpec.quadratic(variance=4.0)
        expected = grid_max(lambda lam: lam * 2.0 - 2.0 * lam**2, 0, 5, 2_000_001)
        assert expected == pytest.approx(0.5, abs=1e-10)
        assert legendre_dual(cgf, 2.0) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("y, expected", [(2.0, 2.0), (0.0, 0.0), (0.5, 1.0)])
    def test_quadratic_inverse(self, y, expected):
        assert legendre_dual_inverse(QUAD, y) == pytest.approx(expected, rel=1e-9, abs=0)

    @pytest.mark.parametrize("y", [0.1, 1.0, 10.0])
    def test_inverse_is_sqrt_2y(self, y):
        assert abs(legendre_dual_inverse(QUAD, y) / math.sqrt(2 * y) - 1) <= 1e-9

    def test_sub_gamma_inverse_against_grid(self):
        cgf = CgfSpec.sub_gamma()
        expected = grid_min(lambda lam: (1.0 + lam**2 / (2 * (1 - lam))) / lam, 0.0, 1.0, 1_000_000)
        assert expected == pytest.approx(1 + math.sqrt(2), abs=1e-9)
        assert legendre_dual_inverse(cgf, 1.0) == pytest.approx(expected, rel=1e-9)

    def test_sub_gamma_dual_stays_in_domain(self):
        # psi*(x) for psi = lam^2 / (2(1 - lam)) is 1 + x - sqrt(1 + 2x)
        cgf = CgfSpec.sub_gamma()
        for x in (0.1, 1.0, 10.0):
            assert legendre_dual(cgf, x) == pytest.approx(1 + x - math.sqrt(1 + 2 * x), rel=1e-8)

    def test_nonconvex_rejected(self):
        bad = CgfSpec(lambda lam: lam**2 / 2 - 0.3 * math.sin(3 * lam) * lam**2)
        with pytest.raises(ChainInvariantError):
            legendre_dual(bad, 1.0)

    def test_nonzero_origin_rejected(self):
        with pytest.raises(ChainInvariantError):
            legendre_dual_inverse(CgfSpec(lambda lam: 1.0 + lam**2), 1.0)

    def test_linear_slope_at_origin_rejected(self):
        with pytest.raises(ChainInvariantError):
            legendre_dual_inverse(CgfSpec(lambda lam: 0.5 * lam + lam**2), 1.0)

    def test_negative_arguments(self):
        with pytest.raises(ChainDomainError):
            legendre_dual(QUAD, -1.0)
        with pytest.raises(ChainDomainError):
            legendre_dual_inverse(QUAD, -1.0)

    @settings(max_examples=50)
    @given(st.floats(0, 10))
    def test_round_trip_x(self, x):
        assert legendre_dual_inverse(QUAD, legendre_dual(QUAD, x)) <= x + 1e-6

    @settings(max_examples=50)
    @given(st.floats(0, 10))
    def test_round_trip_y(self, y):
        assert legendre_dual(QUAD, legendre_dual_inverse(QUAD, y)) >= y - 1e-6


class TestCgfBound:
    def test_single_level(self):
        chain = ChainSpec((ChainLevel(1, 1.0, 2.0),), 0, COMPLETE)
        assert evaluate_cgf_bound(chain, QUAD, lambda k: 1.0).total == pytest.approx(2.0, rel=1e-9)

    @pytest.mark.parametrize(
        "chain",
        [gm.chain_thm1(gm.GaussianParams(0, 1, 1)), pr.chain(pr.PhaseParams(1 / 20, 3.75))],
        ids=["gaussian", "phase"],
    )
    def test_reduces_to_mi_form(self, chain):
        mi = evaluate_mi_bound(chain)
        by_k = {lvl.k: math.sqrt(lvl.link_dist_sq) for lvl in chain.levels}
        cgf = evaluate_cgf_bound(chain, QUAD, by_k.__getitem__)
        assert cgf.variant == "cgf_form"
        assert cgf.total == pytest.approx(mi.total, rel=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(levels)
    def test_reduction_property(self, pairs):
        chain = make_chain(pairs)
        by_k = {lvl.k: math.sqrt(lvl.link_dist_sq) for lvl in chain.levels}
        cgf = evaluate_cgf_bound(chain, QUAD, by_k.__getitem__).total
        assert cgf == pytest.approx(evaluate_mi_bound(chain).total, rel=1e-9, abs=1e-12)


class TestSerialization:
    def test_json_layout(self):
        report = BoundReport("mi_form", 1.0 / 3.0, 0.0, ((1, 1.0 / 3.0),), "demo")
        text = report.to_json()
        assert list(json.loads(text)) == ["variant", "total", "tail_bound", "per_level", "label"]
        assert json.loads(text)["total"] == 0.333333333333
        assert json.loads(text)["per_level"] == [[1, 0.333333333333]]

    def test_infinite_tail_is_null(self):
        report = BoundReport("mi_form", 1.0, math.inf, (), "")
        assert json.loads(report.to_json())["tail_bound"] is None
