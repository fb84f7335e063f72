from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from condmdim.geometry import Dyadic, DyadicVec, linf_dist
from condmdim.shift import (
    PERIODIC,
    ZERO,
    BoundedValue,
    LatticeWord,
    metric_D,
    metric_dN,
    paired_distance_bounds,
    shift,
    tail_horizon,
    window,
    word_distance_matrix,
)

from oracles import truncated_D


def sym(*c):
    return DyadicVec(c)


def zero_word(a=1):
    return LatticeWord.from_symbols([[0] * a])


def words(a=1, q=3, max_len=5):
    coord = st.integers(0, 2 ** q).map(lambda k: Dyadic(k, 2 ** q))
    symbol = st.lists(coord, min_size=a, max_size=a).map(DyadicVec)
    return st.builds(
        lambda syms, lo, ext: LatticeWord.from_symbols(syms, lo=lo, extension=ext, a=a),
        st.lists(symbol, min_size=1, max_size=max_len),
        st.integers(-4, 4),
        st.sampled_from([ZERO, PERIODIC]),
    )


def test_D_identity_is_zero():
    x = LatticeWord.from_symbols([[Fraction(1, 4)], [1]], extension=PERIODIC)
    assert metric_D(x, x, 5) == BoundedValue(0, 0)


def test_D_single_symbol():
    x = LatticeWord.from_symbols([[1]])
    for m in (0, 1, 4):
        assert metric_D(x, zero_word(), m) == BoundedValue(1, 1)


def test_D_periodic_constant():
    x = LatticeWord.from_symbols([[Fraction(1, 4)]], extension=PERIODIC)
    v = metric_D(x, zero_word(), 10)
    assert Fraction(3, 4) in v
    assert v.width <= Fraction(3, 2 ** 9)


def test_dN_examples():
    x = LatticeWord.from_symbols([[1]])
    y = zero_word()
    assert metric_dN(x, y, 1, 3) == metric_D(x, y, 3)
    assert metric_dN(x, y, 2, 3) == BoundedValue(1, 1)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        metric_D(zero_word(1), zero_word(2), 2)


@settings(max_examples=60, deadline=None)
@given(words(), words(), st.integers(0, 6))
def test_D_encloses_brute_force_sum(x, y, m):
    v = metric_D(x, y, m)
    s, tail = truncated_D(x.at, y.at, 40)
    # true value lies in [s, s + tail]; the enclosure must meet that interval
    assert v.lo <= s + tail
    assert v.hi >= s
    assert v.width <= Fraction(2, 2 ** m)


@settings(max_examples=40, deadline=None)
@given(words(), words(), st.integers(1, 4), st.integers(0, 5))
def test_dN_monotone_in_N(x, y, N, m):
    a, b = metric_dN(x, y, N, m), metric_dN(x, y, N + 1, m)
    assert b.lo >= a.lo and b.hi >= a.hi


@settings(max_examples=40, deadline=None)
@given(words(), words(), st.integers(1, 4), st.integers(0, 5))
def test_dN_is_max_of_shifted_D(x, y, N, m):
    per_shift = [metric_D(shift(x, j), shift(y, j), m) for j in range(N)]
    v = metric_dN(x, y, N, m)
    assert v.lo == max(p.lo for p in per_shift)
    assert v.hi >= max(p.lo for p in per_shift)


def test_zero_fill_inside_horizon_is_exact():
    x = LatticeWord.from_symbols([[Fraction(1, 2)], [1], [0]], lo=-1)
    y = LatticeWord.from_symbols([[0], [Fraction(1, 4)]], lo=0)
    assert metric_D(x, y, 3).is_point()


def test_D_lower_bound_at_index_zero():
    x = LatticeWord.from_symbols([[Fraction(3, 4), 0]], a=2)
    y = LatticeWord.from_symbols([[0, Fraction(1, 8)]], a=2)
    assert metric_D(x, y, 0).lo >= linf_dist(x.at(0), y.at(0))


@settings(max_examples=40, deadline=None)
@given(words(a=2), st.integers(-5, 5))
def test_shift_examples(x, k):
    assert shift(x, 0) == x
    assert shift(shift(x, k), -k) == x
    for n in range(-6, 6):
        assert shift(x, 1).at(n) == x.at(n + 1)


def test_window_examples():
    z = LatticeWord.from_symbols([[1], [Fraction(1, 2)]], lo=0)
    assert window(z, 5, 7) == [DyadicVec([0])] * 3
    assert window(z, 0, 1) == list(z.symbols)
    p = LatticeWord.from_symbols([[1], [Fraction(1, 2)], [0]], extension=PERIODIC)
    assert window(p, 0, 4) == window(p, 3, 7)
    with pytest.raises(ValueError):
        window(z, 2, 1)


def test_word_validation():
    with pytest.raises(ValueError):
        LatticeWord(1, 0, 1, (DyadicVec([0]),))
    with pytest.raises(ValueError):
        LatticeWord(2, 0, 0, (DyadicVec([0]),))
    with pytest.raises(ValueError):
        LatticeWord(1, 0, 0, (DyadicVec([0]),), "mirror")


def test_word_json_round_trip():
    w = LatticeWord.from_symbols([[Fraction(3, 8), 1], [0, Fraction(1, 2)]], lo=-3, extension=PERIODIC)
    d = w.to_json()
    assert d == {"a": 2, "lo": -3, "hi": -2, "extension": "periodic", "symbols": [["3/8", "1"], ["0", "1/2"]]}
    assert LatticeWord.from_json(d) == w


def test_tail_horizon():
    assert tail_horizon(Fraction(1, 2)) == 4
    for k in range(1, 8):
        eps = Fraction(1, 2 ** k)
        m = tail_horizon(eps)
        assert Fraction(2, 2 ** m) < eps / 2 <= Fraction(2, 2 ** (m - 1))


def _window_sup(x, y, lo, hi):
    return max(linf_dist(u, v) for u, v in zip(window(x, lo, hi), window(y, lo, hi)))


@settings(max_examples=60, deadline=None)
@given(words(q=5, max_len=8), st.integers(1, 4), st.sampled_from([Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]), st.data())
def test_window_control(x, N, eps, data):
    m = tail_horizon(eps)
    # perturb every stored symbol by less than eps/6 to get a nearby word
    step = Fraction(1, 2 ** 5)
    jitter = data.draw(st.lists(st.integers(-1, 1), min_size=len(x.symbols) * x.a, max_size=len(x.symbols) * x.a))
    it = iter(jitter)
    syms = [DyadicVec(min(1, max(0, c + next(it) * step)) for c in s) for s in x.symbols]
    y = LatticeWord(x.a, x.lo, x.hi, tuple(syms), x.extension)
    if _window_sup(x, y, -m, N + m - 1) < eps / 6:
        assert metric_dN(x, y, N, m).hi < eps


@settings(max_examples=30, deadline=None)
@given(words(max_len=3), words(max_len=3), words(max_len=3))
def test_dN_triangle_with_widths(x, y, z):
    if not (x.extension == y.extension == z.extension):
        return
    xy, yz, xz = (metric_dN(u, v, 2, 6) for u, v in ((x, y), (y, z), (x, z)))
    assert xz.lo <= xy.hi + yz.hi
    assert metric_dN(x, y, 2, 6) == metric_dN(y, x, 2, 6)


def test_matrix_and_paired_agree():
    ws = [
        LatticeWord.from_symbols([[Fraction(1, 4)]], extension=PERIODIC),
        LatticeWord.from_symbols([[1], [0]], lo=2),
        LatticeWord.from_symbols([[Fraction(1, 2)], [Fraction(3, 4)], [0]], lo=-1, extension=PERIODIC),
    ]
    lo, hi, scale = word_distance_matrix(ws, 3, 5)
    for i in range(3):
        for j in range(3):
            v = metric_dN(ws[i], ws[j], 3, 5)
            assert (Fraction(int(lo[i, j]), scale), Fraction(int(hi[i, j]), scale)) == (v.lo, v.hi) or (
                # the batch tail range may be wider; it must still enclose the pairwise one
                Fraction(int(lo[i, j]), scale) == v.lo and Fraction(int(hi[i, j]), scale) >= v.hi
            )
    plo, phi, pscale = paired_distance_bounds(ws, ws[::-1], 3, 5)
    for i in range(3):
        v = metric_dN(ws[i], ws[2 - i], 3, 5)
        assert Fraction(int(plo[i]), pscale) == v.lo
        assert Fraction(int(phi[i]), pscale) >= v.hi
