"""Finitely windowed points of the full shift and the metrics ``D`` and ``d_N``.

A point of ``([0,1]^a)^Z`` is stored as explicit symbols on ``[lo, hi]``
plus an extension rule (zero-fill or periodic). Metric values are returned
as certified intervals: the weighted sum over ``|n| <= m`` is exact and the
tail beyond the horizon ``m`` is bounded analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import DyadicVec, format_rational, parse_rational

ZERO = "zero"
PERIODIC = "periodic"


@dataclass(frozen=True)
class BoundedValue:
    """Exact enclosure ``[lo, hi]`` of a quantity that is only known approximately."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", Fraction(self.lo))
        object.__setattr__(self, "hi", Fraction(self.hi))
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "BoundedValue":
        return cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def is_point(self) -> bool:
        return self.lo == self.hi

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def max(self, other: "BoundedValue") -> "BoundedValue":
        return BoundedValue(max(self.lo, other.lo), max(self.hi, other.hi))

    def to_json(self) -> dict:
        return {"lo": format_rational(self.lo), "hi": format_rational(self.hi)}


@dataclass(frozen=True)
class LatticeWord:
    """Symbols on the window ``[lo, hi]`` with a declared extension outside it."""

    a: int
    lo: int
    hi: int
    symbols: tuple[DyadicVec, ...]
    extension: str = ZERO

    def __post_init__(self):
        syms = tuple(s if isinstance(s, DyadicVec) else DyadicVec(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if self.hi < self.lo:
            raise ValueError("window must satisfy lo <= hi")
        if len(syms) != self.hi - self.lo + 1:
            raise ValueError("symbol count does not match the window")
        if self.extension not in (ZERO, PERIODIC):
            raise ValueError(f"unknown extension {self.extension!r}")
        for s in syms:
            if len(s) != self.a:
                raise ValueError("symbol dimension differs from alphabet dimension")

    @classmethod
    def from_symbols(cls, symbols: Sequence, lo: int = 0, extension: str = ZERO, a: int | None = None):
        syms = tuple(s if isinstance(s, DyadicVec) else DyadicVec(s) for s in symbols)
        if a is None:
            a = len(syms[0])
        return cls(a, lo, lo + len(syms) - 1, syms, extension)

    @property
    def period(self) -> int:
        return self.hi - self.lo + 1

    @property
    def periodic(self) -> bool:
        return self.extension == PERIODIC

    def at(self, n: int) -> DyadicVec:
        if self.lo <= n <= self.hi:
            return self.symbols[n - self.lo]
        if self.extension == PERIODIC:
            return self.symbols[(n - self.lo) % self.period]
        return DyadicVec.zeros(self.a)

    def may_be_nonzero_below(self, n: int) -> bool:
        """Whether some symbol at an index ``< n`` can be non-zero."""
        return self.extension == PERIODIC or self.lo < n

    def may_be_nonzero_above(self, n: int) -> bool:
        return self.extension == PERIODIC or self.hi > n

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "lo": self.lo,
            "hi": self.hi,
            "extension": self.extension,
            "symbols": [s.to_json() for s in self.symbols],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LatticeWord":
        return cls(
            int(data["a"]),
            int(data["lo"]),
            int(data["hi"]),
            tuple(DyadicVec.from_json(s) for s in data["symbols"]),
            data.get("extension", ZERO),
        )


def shift(x: LatticeWord, k: int) -> LatticeWord:
    """``sigma^k x``: the symbol at index ``n`` of the result is ``x_{n+k}``."""
    if k == 0:
        return x
    return LatticeWord(x.a, x.lo - k, x.hi - k, x.symbols, x.extension)


def window(x: LatticeWord, lo: int, hi: int) -> list[DyadicVec]:
    """``(x_lo, ..., x_hi)`` with the extension rule applied off the stored window."""
    if hi < lo:
        raise ValueError("window requires lo <= hi")
    return [x.at(n) for n in range(lo, hi + 1)]


def tail_horizon(eps) -> int:
    """Smallest ``m >= 0`` with ``sum_{|n|>m} 2^-|n| = 2^(1-m) < eps/2``."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = 0
    while Fraction(2, 1 << m) >= eps / 2:
        m += 1
    return m


def _resolution(words: Sequence[LatticeWord]) -> int:
    return max((s.q for w in words for s in w.symbols), default=0)


def _tail_ranges(words: Sequence[LatticeWord], N: int, m: int) -> tuple[range, range]:
    """Index ranges whose diffs bound the tails on each side, for all shifts ``0 <= j < N``.

    Off its stored window a word is either zero or periodic, so one full
    common period beyond the outermost stored index captures every value
    the tail can take.
    """
    period = 1
    for w in words:
        if w.extension == PERIODIC:
            period = math.lcm(period, w.period)
    below_top = N - m - 2
    below_start = min(min(w.lo for w in words), below_top) - period
    above_bottom = m + 1
    above_stop = max(max(w.hi for w in words), above_bottom) + period
    return range(below_start, below_top + 1), range(above_bottom, above_stop + 1)


def _word_array(words: Sequence[LatticeWord], idx: range, q: int) -> np.ndarray:
    arr = np.empty((len(words), len(idx), words[0].a), dtype=np.int64)
    for i, w in enumerate(words):
        for t, n in enumerate(idx):
            arr[i, t] = w.at(n).at(q)
    return arr


def _check_dims(x: LatticeWord, y: LatticeWord) -> None:
    if x.a != y.a:
        raise ValueError(f"alphabet dimension mismatch: {x.a} vs {y.a}")


def metric_dN(x: LatticeWord, y: LatticeWord, N: int, m: int) -> BoundedValue:
    """Certified enclosure of ``d_N(x, y) = max_{0<=j<N} D(sigma^j x, sigma^j y)``.

    Each ``D(sigma^j x, sigma^j y)`` is enclosed by the exact partial sum over
    ``|n| <= m`` plus ``2^-m`` times the largest symbol difference that can
    occur beyond the horizon on each side.
    """
    _check_dims(x, y)
    lo, hi, scale = word_distance_matrix([x, y], N, m)
    return BoundedValue(Fraction(int(lo[0, 1]), scale), Fraction(int(hi[0, 1]), scale))


def metric_D(x: LatticeWord, y: LatticeWord, m: int) -> BoundedValue:
    """Certified enclosure of ``D(x, y) = sum_n 2^-|n| ||x_n - y_n||_inf``."""
    return metric_dN(x, y, 1, m)


def word_distance_matrix(words: Sequence[LatticeWord], N: int, m: int):
    """Pairwise ``d_N`` enclosures for a list of words, as exact integer matrices.

    Returns ``(lo, hi, scale)``: ``lo[i, j] / scale <= d_N(w_i, w_j) <= hi[i, j] / scale``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if m < 0:
        raise ValueError("tail horizon must be >= 0")
    k = len(words)
    if k == 0:
        z = np.zeros((0, 0), dtype=np.int64)
        return z, z.copy(), 1
    a = words[0].a
    for w in words:
        if w.a != a:
            raise ValueError("alphabet dimension mismatch")
    q = _resolution(words)
    if q + m > 58:
        raise OverflowError("resolution plus tail horizon too large for exact int64 sums")
    core = _word_array(words, range(-m, N + m), q)
    below_idx, above_idx = _tail_ranges(words, N, m)
    below = _word_array(words, below_idx, q) if len(below_idx) else None
    above = _word_array(words, above_idx, q) if len(above_idx) else None
    weights = np.array([1 << (m - abs(n)) for n in range(-m, m + 1)], dtype=np.int64)
    scale = 1 << (q + m)
    lo = np.zeros((k, k), dtype=np.int64)
    hi = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        diff = np.abs(core[i][None] - core).max(axis=2)
        best = None
        for j in range(N):
            s = diff[:, j: j + 2 * m + 1] @ weights
            best = s if best is None else np.maximum(best, s)
        # tails: sup of the symbol difference times 2^-m, i.e. times 2^q at this scale
        tail = np.zeros(k, dtype=np.int64)
        for side in (below, above):
            if side is not None:
                tail += np.abs(side[i][None] - side).max(axis=(1, 2))
        lo[i] = best
        hi[i] = best + tail
    return lo, hi, scale


def bounded_to_json(v: BoundedValue) -> dict:
    return v.to_json()


def bounded_from_json(d: dict) -> BoundedValue:
    return BoundedValue(parse_rational(d["lo"]), parse_rational(d["hi"]))


def word_period_lcm(*words: LatticeWord) -> int:
    out = 1
    for w in words:
        out = math.lcm(out, w.period)
    return out


def paired_distance_bounds(xs: Sequence[LatticeWord], ys: Sequence[LatticeWord], N: int, m: int):
    """``d_N`` enclosures for the pairs ``(xs[i], ys[i])``, vectorized.

    Returns ``(lo, hi, scale)`` with one entry per pair. Uses the same
    bounds as :func:`word_distance_matrix`.
    """
    if len(xs) != len(ys):
        raise ValueError("pair lists differ in length")
    if not xs:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 1
    words = list(xs) + list(ys)
    a = words[0].a
    if any(w.a != a for w in words):
        raise ValueError("alphabet dimension mismatch")
    q = _resolution(words)
    if q + m > 58:
        raise OverflowError("resolution plus tail horizon too large for exact int64 sums")
    P = len(xs)
    weights = np.array([1 << (m - abs(n)) for n in range(-m, m + 1)], dtype=np.int64)
    core = _word_array(words, range(-m, N + m), q)
    diff = np.abs(core[:P] - core[P:]).max(axis=2)
    lo = np.max(np.stack([diff[:, j: j + 2 * m + 1] @ weights for j in range(N)]), axis=0)
    tail = np.zeros(P, dtype=np.int64)
    for idx in _tail_ranges(words, N, m):
        if len(idx):
            side = _word_array(words, idx, q)
            tail += np.abs(side[:P] - side[P:]).max(axis=(1, 2))
    return lo, lo + tail, 1 << (q + m)
