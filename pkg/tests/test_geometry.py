from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from condmdim.geometry import (
    CapExceeded,
    Dyadic,
    DyadicVec,
    QGrid,
    axis_cover_count,
    box_cover_count,
    enumerate_grid,
    format_rational,
    interval_cover_count,
    linf_dist,
    parse_rational,
)

from oracles import brute_axis_cover


def vecs(dim, q=4):
    coord = st.integers(0, 2 ** q).map(lambda k: Dyadic(k, 2 ** q))
    return st.lists(coord, min_size=dim, max_size=dim).map(DyadicVec)


def test_linf_examples():
    assert linf_dist(DyadicVec([0, 0]), DyadicVec([0, 0])) == 0
    assert linf_dist(DyadicVec([0, Fraction(1, 2)]), DyadicVec([Fraction(1, 4), 0])) == Fraction(1, 2)
    assert linf_dist(DyadicVec([1, 1]), DyadicVec([0, 0])) == 1


def test_linf_dimension_mismatch():
    with pytest.raises(ValueError):
        linf_dist(DyadicVec([0]), DyadicVec([0, 0]))


@given(vecs(3), vecs(3), vecs(3))
def test_linf_is_a_metric(u, v, w):
    assert linf_dist(u, v) == linf_dist(v, u)
    assert linf_dist(u, w) <= linf_dist(u, v) + linf_dist(v, w)
    assert (linf_dist(u, v) == 0) == (u == v)


def test_dyadic_rejects_other_denominators():
    with pytest.raises(ValueError):
        Dyadic(1, 3)


@pytest.mark.parametrize("text,value", [("3/8", Fraction(3, 8)), ("3/2^3", Fraction(3, 8)), ("1", 1), ("0.375", Fraction(3, 8))])
def test_dyadic_parse(text, value):
    d = Dyadic.parse(text)
    assert d == value and d.q == Fraction(value).denominator.bit_length() - 1


def test_dyadic_resolution_and_equality():
    d = Dyadic(2, 8)
    assert d == Dyadic(1, 4) and hash(d) == hash(Dyadic(1, 4))
    assert d.q == 2 and d.at(5) == 8
    with pytest.raises(ValueError):
        d.at(1)


def test_vec_rejects_out_of_cube():
    with pytest.raises(ValueError):
        DyadicVec([Fraction(3, 2)])


def test_vec_json_round_trip():
    v = DyadicVec([Fraction(3, 8), 1, 0])
    assert v.to_json() == ["3/8", "1", "0"]
    assert DyadicVec.from_json(v.to_json()) == v


def test_rational_format_and_parse():
    assert format_rational(Fraction(6, 16)) == "3/8"
    assert parse_rational("1/2^4") == Fraction(1, 16)
    with pytest.raises(ValueError):
        parse_rational("abc")


def test_enumerate_grid_examples():
    assert list(enumerate_grid(QGrid(1, 1))) == [DyadicVec([0]), DyadicVec([Fraction(1, 2)]), DyadicVec([1])]
    assert len(list(enumerate_grid(QGrid(2, 1)))) == 9
    assert list(enumerate_grid(QGrid(1, 0))) == [DyadicVec([0]), DyadicVec([1])]


def test_enumerate_grid_order_and_count():
    pts = list(enumerate_grid(QGrid(2, 2)))
    assert len(pts) == QGrid(2, 2).count == 25
    assert pts == sorted(pts)
    assert len(set(pts)) == 25


def test_enumerate_grid_cap():
    with pytest.raises(CapExceeded):
        list(enumerate_grid(QGrid(3, 4), cap=100))


def test_axis_cover_examples():
    # frozen from the brute-force set-cover oracle
    assert axis_cover_count(2, Fraction(1, 2)) == 3
    assert axis_cover_count(3, 2) == 1
    assert axis_cover_count(0, Fraction(1, 2)) == 2


@pytest.mark.parametrize("q", [0, 1, 2, 3])
@pytest.mark.parametrize("eps", [Fraction(k, 16) for k in (1, 3, 4, 5, 8, 11, 16)] + [Fraction(3, 2)])
def test_axis_cover_matches_oracle(q, eps):
    assert axis_cover_count(q, eps) == brute_axis_cover(q, eps)


@given(st.integers(0, 6), st.integers(1, 64), st.integers(1, 64))
def test_axis_cover_non_increasing(q, a, b):
    e1, e2 = sorted((Fraction(a, 32), Fraction(b, 32)))
    assert axis_cover_count(q, e1) >= axis_cover_count(q, e2)


def test_interval_and_box_counts():
    assert interval_cover_count(1, Fraction(1, 2)) == 3
    assert interval_cover_count(0, Fraction(1, 8)) == 1
    assert box_cover_count(1, Fraction(1, 12)) == 12
    assert box_cover_count(0, Fraction(1, 12)) == 1
