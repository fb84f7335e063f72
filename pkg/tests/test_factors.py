from fractions import Fraction
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from condmdim.factors import (
    CoordinatewiseMap,
    ProjectionFactor,
    apply_factor,
    bracket_table,
    collapsed,
    default_resolution,
    fiber_cover_bracket,
    fullshift_embedding,
    hypothesis_check,
    with_fixed_point,
)
from condmdim.geometry import Dyadic, DyadicVec
from condmdim.shift import PERIODIC, ZERO, LatticeWord, metric_D, shift, tail_horizon


def words(a, q=3, max_len=5):
    coord = st.integers(0, 2 ** q).map(lambda k: Dyadic(k, 2 ** q))
    symbol = st.lists(coord, min_size=a, max_size=a).map(DyadicVec)
    return st.builds(
        lambda syms, lo, ext: LatticeWord.from_symbols(syms, lo=lo, extension=ext, a=a),
        st.lists(symbol, min_size=1, max_size=max_len),
        st.integers(-3, 3),
        st.sampled_from([ZERO, PERIODIC]),
    )


def test_apply_examples():
    x = LatticeWord.from_symbols([[Fraction(1, 2), Fraction(3, 4)]], a=2)
    assert apply_factor(ProjectionFactor(2, 1), x).symbols == (DyadicVec([Fraction(1, 2)]),)
    assert apply_factor(ProjectionFactor(2, 2), x) == x
    with pytest.raises(ValueError):
        apply_factor(ProjectionFactor(3, 1), x)
    with pytest.raises(ValueError):
        ProjectionFactor(1, 2)


@settings(max_examples=50)
@given(words(3), st.integers(-4, 4), st.integers(0, 3))
def test_apply_commutes_with_shift(x, k, b):
    p = ProjectionFactor(3, b)
    assert apply_factor(p, shift(x, k)) == shift(apply_factor(p, x), k)


@settings(max_examples=40, deadline=None)
@given(words(2), words(2), st.integers(0, 5))
def test_projection_is_one_lipschitz(x, y, m):
    p = ProjectionFactor(2, 1)
    src = metric_D(x, y, m)
    img = metric_D(apply_factor(p, x), apply_factor(p, y), m)
    assert img.lo <= src.lo and img.hi <= src.hi


def test_coordinatewise_map():
    f = CoordinatewiseMap(1, 1, lambda s: DyadicVec([1 - s[0]]))
    x = LatticeWord.from_symbols([[Fraction(1, 4)], [1]])
    assert f.apply(x).symbols == (DyadicVec([Fraction(3, 4)]), DyadicVec([0]))


def test_bracket_examples():
    b = fiber_cover_bracket(ProjectionFactor(2, 1), 1, Fraction(1, 2), q=2)
    assert b.count_lower == 3
    assert b.lower == pytest.approx(math.log2(3))
    assert b.lower_at_least(1)
    flat = fiber_cover_bracket(ProjectionFactor(2, 2), 3, Fraction(1, 4))
    assert (flat.lower, flat.upper) == (0, 0)


@pytest.mark.parametrize("k", [4, 6, 8])
def test_bracket_upper_closed_form(k):
    eps = Fraction(1, 2 ** k)
    b = fiber_cover_bracket(ProjectionFactor(2, 1), 8 * k, eps)
    m = tail_horizon(eps)
    assert b.m == m
    assert b.upper == pytest.approx((1 + 2 * m / (8 * k)) * math.log(6 * 2 ** k) / (k * math.log(2)))


def test_bracket_parameters():
    with pytest.raises(ValueError):
        fiber_cover_bracket(ProjectionFactor(2, 1), 1, Fraction(1, 2), q=1)
    with pytest.raises(ValueError):
        fiber_cover_bracket(ProjectionFactor(2, 1), 1, Fraction(1, 3))
    with pytest.raises(ValueError):
        fiber_cover_bracket(ProjectionFactor(2, 1), 0, Fraction(1, 2))


@settings(max_examples=60)
@given(st.sampled_from([(2, 1), (3, 1), (3, 2), (4, 1)]), st.integers(1, 9), st.integers(1, 40))
def test_bracket_lower_at_least_free_dimension(ab, k, N):
    a, b = ab
    br = fiber_cover_bracket(ProjectionFactor(a, b), N, Fraction(1, 2 ** k))
    assert br.lower_at_least(a - b)
    assert br.count_lower <= br.count_upper


@pytest.mark.parametrize("ab", [(2, 1), (3, 1), (3, 2)])
def test_bracket_upper_decreasing_along_diagonal(ab):
    p = ProjectionFactor(*ab)
    seq = [fiber_cover_bracket(p, 8 * k, Fraction(1, 2 ** k)) for k in range(2, 11)]
    assert all(later.upper_below(earlier) for earlier, later in zip(seq, seq[1:]))


def test_bracket_table_columns():
    p = ProjectionFactor(3, 1)
    t = bracket_table(p, [fiber_cover_bracket(p, 8, Fraction(1, 2))])
    header = t.to_csv().splitlines()[0].split(",")
    assert header[-2:] == ["a", "b"]


def test_default_resolution():
    assert default_resolution(Fraction(1, 2)) == 2
    assert default_resolution(Fraction(1, 8)) == 4
    assert default_resolution(Fraction(3, 8)) == 3


def _pairs(a, n, count, seed):
    rng = random.Random(seed)
    pt = lambda: tuple(DyadicVec(Dyadic(rng.randint(0, 8), 8) for _ in range(a)) for _ in range(n))  # noqa: E731
    return [(pt(), pt()) for _ in range(count)]


def test_fullshift_embeddings_pass():
    fam = [fullshift_embedding(2, n) for n in (1, 2, 3)]
    rep = hypothesis_check(fam, [_pairs(2, n, 30, n) for n in (1, 2, 3)])
    assert rep.passed and rep.checked == 90
    assert rep.ratios == [2, 2, 2] and rep.trend == "constant"
    assert rep.to_json()["status"] == "PASS"


def test_fixed_point_product_passes():
    fam = [with_fixed_point(fullshift_embedding(1, n), DyadicVec([0])) for n in (1, 2)]
    assert hypothesis_check(fam, [_pairs(1, n, 20, n) for n in (1, 2)]).passed
    bad = with_fixed_point(fullshift_embedding(1, 1), DyadicVec([Fraction(1, 2)]))
    with pytest.raises(ValueError):
        bad.psi((DyadicVec([0]),))


def test_collapsed_embedding_fails_with_witness():
    level = collapsed(fullshift_embedding(1, 2))
    pair = ((DyadicVec([0]), DyadicVec([0])), (DyadicVec([1]), DyadicVec([0])))
    rep = hypothesis_check([level], [[pair]])
    assert not rep.passed
    w = rep.violations[0]
    assert w["norm"] == "1" and w["dN_lo"] == "0"
