import itertools

from hypothesis import given
from hypothesis import strategies as st

from congruent import gf2

rows_st = st.lists(st.integers(min_value=0, max_value=2**12 - 1), max_size=10)


def _rank_by_span(rows):
    # size of the span is 2^rank
    span = {0}
    for r in rows:
        span |= {s ^ r for s in span}
    return len(span).bit_length() - 1


@given(rows_st)
def test_rank_matches_span_size(rows):
    assert gf2.rank(rows) == _rank_by_span(rows)


@given(rows_st)
def test_span_enumerates_all_combinations(rows):
    combos = {0}
    for k in range(1, len(rows) + 1):
        for sub in itertools.combinations(rows, k):
            x = 0
            for r in sub:
                x ^= r
            combos.add(x)
    assert set(gf2.span(rows)) == combos


@given(rows_st)
def test_nullspace_is_orthogonal_and_complementary(rows):
    n = 12
    null = gf2.nullspace(rows, n)
    for v in null:
        assert all(gf2.dot(r, v) == 0 for r in rows)
    assert len(null) == n - gf2.rank(rows)
    assert gf2.rank(null) == len(null)


@given(rows_st)
def test_echelon_preserves_row_space(rows):
    ech = gf2.echelon(rows)
    assert len(ech) == gf2.rank(rows)
    assert set(gf2.span(ech)) == set(gf2.span(rows))
