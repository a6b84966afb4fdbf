import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from congruent import stats
from congruent.errors import DataError, DomainError, SchemaError, UndefinedAverageError


def _records(pairs, column="s2"):
    return [{"D": D, column: r} for D, r in pairs]


def test_alpha_against_long_product():
    ref = math.prod(1 / (1 + 2.0**-n) for n in range(1, 200))
    assert stats.ALPHA == pytest.approx(ref, abs=1e-15)


@pytest.mark.parametrize(
    "r,expected", [(0, 0.419422), (1, 0.838845), (2, 0.559230), (3, 0.223692), (4, 0.063912), (5, 0.014203)]
)
def test_hb_pmf_values(r, expected):
    assert round(stats.hb_rank_pmf(r), 6) == expected


def test_hb_pmf_masses_not_normalised():
    # neither variant sums to one over a parity class; the masses are reported, not rescaled
    assert stats.hb_rank_pmf_mass(0) == pytest.approx(1.04256, abs=1e-5)
    assert stats.hb_rank_pmf_mass(1) == pytest.approx(1.07674, abs=1e-5)
    assert stats.hb_rank_pmf_mass(0, 40, "power") < 1
    with pytest.raises(DomainError):
        stats.hb_rank_pmf(2, "other")


def test_trailing_and_consistency():
    assert round(stats.trailing_bound(4), 6) == 0.027052
    assert round(stats.TRAILING_CONSTANT * 2.0**-6, 6) == 0.027052
    assert stats.trailing_bound(0) == stats.trailing_bound(1) == stats.TRAILING_CONSTANT


def test_moment_constants():
    assert [stats.hb_moment_constant(k) for k in (1, 2, 3)] == [3, 15, 135]
    assert stats.moment_constant_discrepancies() == {3: (35, 135)}


def test_average_rank_constants():
    assert stats.average_rank_constant(stats.LOW) == 1.2039
    assert stats.average_rank_constant(stats.HIGH) == 1.325
    with pytest.raises(DomainError):
        stats.average_rank_constant(stats.ALL)
    assert stats.average_rank_discrepancies() == {3: (1.2039, 1.2309)}


def test_pr_pmf_normalised_and_moments():
    assert sum(stats.pr_pmf(d) for d in range(31)) == pytest.approx(1.0, abs=1e-12)
    assert [stats.pr_moment(m) for m in (1, 2, 3)] == [3, 15, 135]


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("r", [0, 1])
def test_delaunay_normalised(p, r):
    assert sum(stats.delaunay_pmf(p, r, n) for n in range(40)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 200.0), st.floats(0.0, 400.0))
def test_upper_gamma_matches_scipy(a, x):
    assert stats.upper_gamma_regularized(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-9, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 10_000), min_size=2, max_size=6))
def test_chi_square_matches_scipy(obs):
    r = stats.chi_square(obs)
    ref = sps.chisquare(obs)
    assert r.statistic == pytest.approx(ref.statistic, rel=1e-12, abs=1e-12)
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)


def test_chi_square_errors():
    with pytest.raises(DataError):
        stats.chi_square([5])
    with pytest.raises(DataError):
        stats.chi_square([1, 2], [0, 3])


def test_class_keys():
    assert stats.LOW.contains(17) and not stats.LOW.contains(13)
    assert stats.LOW.parity == 0 and stats.HIGH.parity == 1 and stats.ALL.parity is None
    assert [stats.selmer_parity(D) for D in (1, 2, 3, 5, 6, 7)] == [0, 0, 0, 1, 1, 1]


def test_record_field_access():
    assert stats.record_field({"D": 3}, "D") == 3
    with pytest.raises(SchemaError):
        stats.record_field({"D": 3}, "s2")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=200))
def test_empirical_pmf_sums_to_one(ranks):
    recs = _records([(8 * i + 1, r) for i, r in enumerate(ranks)])
    rep = stats.empirical_distribution(recs, "s2", stats.LOW)
    assert abs(sum(rep.pmf.values()) - 1.0) < 1e-12
    assert rep.average == pytest.approx(np.mean(ranks))
    assert rep.trailing[0] == 1.0
    assert rep.moments[1] == pytest.approx(np.mean(2.0 ** np.array(ranks)))


def test_empirical_filters_class_and_missing():
    recs = _records([(1, 0), (3, 2), (5, 1), (9, None)])
    rep = stats.empirical_distribution(recs, "s2", stats.LOW)
    assert rep.size == 2 and rep.counts == {0: 1, 2: 1}
    with pytest.raises(UndefinedAverageError):
        stats.empirical_distribution(_records([(5, 1)]), "s2", stats.LOW)


def test_error_normalization():
    recs = _records([(D, 0) for D in range(1, 2000, 8)])
    out = stats.error_normalization(recs, 1, 1, [100.0, 1000.0])
    # every 2^s = 1, so the error is |n - 3n| = 2n
    n = len(range(1, 101, 8))
    assert out[0][1] == pytest.approx(2 * n / (100 * stats.log_factor(1, 100.0)))
    with pytest.raises(DomainError):
        stats.error_normalization(recs, 1, 1, [1000.0, 100.0])


def test_sha_dim():
    recs = [{"D": 17, "s2": 2, "mw_rank": 0}, {"D": 5, "s2": 1, "mw_rank": 1}, {"D": 7, "s2": 1, "mw_rank": 0}]
    out = stats.sha_dim(recs, 2)
    assert [(d.dim, d.anomalous) for d in out] == [(2, False), (0, False), (1, True)]


def test_goldfeld_counts():
    recs = _records([(D, D % 3 % 2) for D in range(1, 3001)], "mw_rank")
    rep = stats.goldfeld_report(recs, "mw", every=1000)
    # D = 0, 4 mod 8 fall outside every class
    assert rep.n0 + rep.n1 + rep.n_higher == 2250
    assert len(rep.running) == 3 and rep.running[-1][0] == 2999


def test_resample_deterministic_and_bounded():
    recs = _records([(D, D % 2) for D in range(1, 1001)], "mw_rank")
    a = stats.bernoulli_resample(recs, 0.2, 50, seed=7)
    b = stats.bernoulli_resample(recs, 0.2, 50, seed=7)
    assert np.array_equal(a.proportions, b.proportions)
    assert 0 <= a.min <= a.mean <= a.max <= 1
    with pytest.raises(DomainError):
        stats.bernoulli_resample(recs, 0.0, 5, seed=1)
