"""Finite-scale covering profiles and their certified slopes.

A profile stores, for each horizon ``N`` and scale ``eps``, an integer
bracket ``lower <= #(X, d_N, eps) <= upper``. Log columns are derived
for display only; every decision (rate minima, subadditivity, slope
thresholds) is made on the integer counts.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Protocol, Sequence

from .covering import FiniteMetricSpace, cover_bounds
from .geometry import (
    CapExceeded,
    Dyadic,
    DyadicVec,
    axis_cover_count,
    box_cover_count,
    format_rational,
    interval_cover_count,
)
from .shift import LatticeWord, tail_horizon, word_distance_matrix

WINDOW = "window"
BOWEN_D = "D"


class LogRatio:
    """The real number ``log(count) / scale``, ordered without floating point.

    ``log c1 / s1 < log c2 / s2`` is decided as ``c1 ** (s2) < c2 ** (s1)``
    after clearing the rational denominators of the scales.
    """

    __slots__ = ("count", "scale")

    def __init__(self, count: int, scale=1):
        if count < 1:
            raise ValueError("log of a count below 1 is undefined here")
        scale = Fraction(scale)
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.count = int(count)
        self.scale = scale

    def __float__(self) -> float:
        return math.log(self.count) / float(self.scale)

    def _cmp(self, other: "LogRatio") -> int:
        s1, s2 = self.scale, other.scale
        e1 = s2.numerator * s1.denominator
        e2 = s1.numerator * s2.denominator
        left, right = self.count ** e1, other.count ** e2
        return (left > right) - (left < right)

    def __eq__(self, other):
        return isinstance(other, LogRatio) and self._cmp(other) == 0

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(float(self))

    def __repr__(self) -> str:
        return f"LogRatio({self.count}, {self.scale}) ~ {float(self):.6g}"

    def at_least_log2(self, r) -> bool:
        """Whether ``log(count)/scale >= r * log 2`` for a rational ``r``, exactly."""
        r = Fraction(r) * self.scale
        # log c >= r log 2  <=>  c ** den >= 2 ** num
        if r <= 0:
            return True
        return self.count ** r.denominator >= 2 ** r.numerator

    def at_most_log2(self, r) -> bool:
        r = Fraction(r) * self.scale
        if r < 0:
            return False
        return self.count ** r.denominator <= 2 ** r.numerator


def _log(x) -> float:
    return math.log(x) if isinstance(x, int) else float(x)


@dataclass(frozen=True)
class ProfileRow:
    """One ``(N, eps)`` cell.

    ``lower``/``upper`` are covering-number counts (ints) or, for tables
    built from raw sequences, exact logarithm values (Fractions).
    """

    N: int
    eps: Fraction
    lower: int | Fraction
    upper: int | Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        if self.lower > self.upper:
            raise ValueError(f"row N={self.N}: lower exceeds upper")

    @property
    def counts(self) -> bool:
        return isinstance(self.lower, int) and isinstance(self.upper, int)

    @property
    def log_lower(self) -> float:
        return 0.0 if self.lower == 0 else _log(self.lower)

    @property
    def log_upper(self) -> float:
        return 0.0 if self.upper == 0 else _log(self.upper)

    def normalized(self, value: float) -> float:
        return value / (self.N * math.log(1 / self.eps)) if self.eps < 1 else float("nan")


@dataclass
class ProfileTable:
    """Certified profile rows plus what is needed to interpret them.

    ``rate_overhead`` is the window overhead used for ``rate_lower``: ``0``
    when the lower counts are exactly multiplicative in ``N``, ``None`` when
    no sound correction is known.
    """

    system_id: str
    rows: list[ProfileRow]
    rate_overhead: int | None = None
    notes: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r.N, -r.eps))

    @classmethod
    def from_values(cls, values: Iterable[tuple[int, object]], eps=Fraction(1, 2), system_id="sequence"):
        """Table from raw ``(N, a_N)`` log values, lower = upper = ``a_N``."""
        rows = [ProfileRow(int(n), eps, Fraction(v), Fraction(v)) for n, v in values]
        return cls(system_id, rows, rate_overhead=0)

    def for_eps(self, eps) -> list[ProfileRow]:
        eps = Fraction(eps)
        return [r for r in self.rows if r.eps == eps]

    def row(self, N: int, eps) -> ProfileRow:
        for r in self.for_eps(eps):
            if r.N == N:
                return r
        raise KeyError(f"no row for N={N}, eps={format_rational(eps)}")

    def to_json(self) -> dict:
        return {
            "system": self.system_id,
            "label": "finite-scale bracket",
            "notes": list(self.notes),
            **self.extra,
            "rows": [_row_json(r) for r in self.rows],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        extra_cols = sorted(self.extra)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["N", "eps", "count_lower", "count_upper", "log_lower", "log_upper",
             "normalized_lower", "normalized_upper", *extra_cols]
        )
        for r in self.rows:
            d = _row_json(r)
            w.writerow([d[k] for k in (
                "N", "eps", "count_lower", "count_upper", "log_lower", "log_upper",
                "normalized_lower", "normalized_upper")] + [self.extra[c] for c in extra_cols])
        return buf.getvalue()


def _fmt_float(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.12g}"


def _row_json(r: ProfileRow) -> dict:
    def exact(v):
        return str(v) if isinstance(v, int) else format_rational(v)

    return {
        "N": r.N,
        "eps": format_rational(r.eps),
        "count_lower": exact(r.lower) if r.counts else "",
        "count_upper": exact(r.upper) if r.counts else "",
        # display columns
        "log_lower": _fmt_float(r.log_lower) if r.counts else exact(r.lower),
        "log_upper": _fmt_float(r.log_upper) if r.counts else exact(r.upper),
        "normalized_lower": _fmt_float(r.normalized(r.log_lower)),
        "normalized_upper": _fmt_float(r.normalized(r.log_upper)),
    }


# -- systems ---------------------------------------------------------------


class ProfiledSystem(Protocol):
    system_id: str
    rate_overhead: int | None

    def counts(self, N: int, eps: Fraction) -> tuple[int, int]: ...


def _check_resolution(q: int, eps: Fraction) -> None:
    # the grid must be fine enough that the axis count sees the true scale
    if Fraction(1, 1 << q) > eps / 2:
        raise ValueError(f"resolution q={q} too coarse for eps={format_rational(eps)} (need 2^-q <= eps/2)")


@dataclass(frozen=True)
class FullShift:
    """The full shift over ``[0,1]^a`` sampled at grid resolution ``q``.

    ``metric="window"`` profiles the sup-norm on the coordinates
    ``0..N-1`` of the quantized words (exact product counts).
    ``metric="D"`` profiles the Bowen metric of ``D``: lower from the
    product separated grid, upper from ``eps/6`` boxes on the widened window.
    """

    a: int
    q: int
    metric: str = WINDOW
    rate_overhead: int | None = 0

    @property
    def system_id(self) -> str:
        return f"fullshift(a={self.a}, q={self.q}, metric={self.metric})"

    def counts(self, N: int, eps: Fraction) -> tuple[int, int]:
        _check_resolution(self.q, eps)
        lower = axis_cover_count(self.q, eps) ** (self.a * N)
        if self.metric == WINDOW:
            return lower, lower
        if self.metric != BOWEN_D:
            raise ValueError(f"unknown metric {self.metric!r}")
        m = tail_horizon(eps)
        upper = box_cover_count(1, eps / 6) ** (self.a * (N + 2 * m))
        return lower, upper


@dataclass(frozen=True)
class Singleton:
    a: int = 1
    rate_overhead: int | None = 0
    system_id: str = "singleton"

    def counts(self, N: int, eps: Fraction) -> tuple[int, int]:
        return 1, 1


@dataclass(frozen=True)
class WordSet:
    """An explicit finite set of words, profiled by enumeration under ``d_N``."""

    words: tuple[LatticeWord, ...]
    system_id: str = "wordset"
    rate_overhead: int | None = None
    m: int | None = None

    def counts(self, N: int, eps: Fraction) -> tuple[int, int]:
        m = tail_horizon(eps) if self.m is None else self.m
        lo, hi, scale = word_distance_matrix(list(self.words), N, m)
        space = FiniteMetricSpace(range(len(self.words)), lo, hi, scale, validate=False)
        res = cover_bounds(space, eps)
        return res.lower, res.upper


def profile_S(system: ProfiledSystem, Ns: Sequence[int], epss: Sequence) -> ProfileTable:
    """Certified covering brackets for every ``(N, eps)`` cell."""
    rows = []
    for N in sorted(set(Ns)):
        if N < 1:
            raise ValueError("N must be >= 1")
        for eps in sorted({Fraction(e) for e in epss}, reverse=True):
            lo, hi = system.counts(N, eps)
            rows.append(ProfileRow(N, eps, lo, hi))
    return ProfileTable(system.system_id, rows, rate_overhead=system.rate_overhead)


# -- rates -----------------------------------------------------------------


@dataclass(frozen=True)
class RateEstimate:
    eps: Fraction
    rate_upper: float | Fraction
    rate_upper_N: int
    rate_lower: float | Fraction | None
    rate_lower_N: int | None
    structure_dependent: bool = True

    @property
    def normalized_upper(self) -> float:
        return float(self.rate_upper) / math.log(1 / self.eps)

    @property
    def normalized_lower(self) -> float | None:
        if self.rate_lower is None:
            return None
        return float(self.rate_lower) / math.log(1 / self.eps)

    def to_json(self) -> dict:
        def show(v):
            return None if v is None else (format_rational(v) if isinstance(v, Fraction) else _fmt_float(v))

        return {
            "eps": format_rational(self.eps),
            "rate_upper": show(self.rate_upper),
            "rate_upper_N": self.rate_upper_N,
            "rate_lower": show(self.rate_lower),
            "rate_lower_N": self.rate_lower_N,
            "normalized_upper": _fmt_float(self.normalized_upper),
            "normalized_lower": None if self.rate_lower is None else _fmt_float(self.normalized_lower),
            "rate_lower_structure_dependent": self.structure_dependent,
        }


def _ratio(value, denom: int):
    """Comparable form of ``log(value) / denom`` (count rows) or ``value / denom`` (log rows)."""
    if isinstance(value, int):
        return LogRatio(max(value, 1), denom)
    return Fraction(value) / denom


def rate_estimate(p: ProfileTable, eps) -> RateEstimate:
    """Fekete upper bound ``min_N log_upper(N)/N`` and the corrected lower rate."""
    eps = Fraction(eps)
    rows = p.for_eps(eps)
    if len({r.N for r in rows}) < 2:
        raise ValueError(f"need at least two horizons at eps={format_rational(eps)}")
    best_up = min(rows, key=lambda r: (_ratio(r.upper, r.N), r.N))
    up = _ratio(best_up.upper, best_up.N)
    low = low_N = None
    if p.rate_overhead is not None:
        best_low = max(rows, key=lambda r: (_ratio(r.lower, r.N + p.rate_overhead), -r.N))
        low = _ratio(best_low.lower, best_low.N + p.rate_overhead)
        low_N = best_low.N
    as_value = lambda v: v if isinstance(v, Fraction) else float(v)  # noqa: E731
    return RateEstimate(
        eps,
        as_value(up),
        best_up.N,
        None if low is None else as_value(low),
        low_N,
        structure_dependent=True,
    )


# -- subadditivity ---------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    N1: int
    N2: int
    lhs: object
    rhs: object

    def to_json(self) -> dict:
        return {"N1": self.N1, "N2": self.N2, "lhs": str(self.lhs), "rhs": str(self.rhs)}


def check_subadditivity(seq: Sequence[tuple[int, object]], slack=0) -> list[Violation]:
    """All triples with ``a_{N1+N2} > a_{N1} + a_{N2} + slack`` (``N1 <= N2``)."""
    values = {int(n): Fraction(v) for n, v in seq}
    slack = Fraction(slack)
    out = []
    for n1, n2 in itertools.combinations_with_replacement(sorted(values), 2):
        if n1 + n2 in values and values[n1 + n2] > values[n1] + values[n2] + slack:
            out.append(Violation(n1, n2, values[n1 + n2], values[n1] + values[n2] + slack))
    return out


def check_profile_subadditivity(p: ProfileTable, eps, max_total: int | None = None) -> list[Violation]:
    """Certified violations: ``lower(N1+N2) > upper(N1) * upper(N2)``.

    Any such triple contradicts subadditivity of the true log counts, since
    the true values are bracketed by the rows.
    """
    rows = {r.N: r for r in p.for_eps(eps)}
    out = []
    for n1, n2 in itertools.combinations_with_replacement(sorted(rows), 2):
        n = n1 + n2
        if n not in rows or (max_total is not None and n > max_total):
            continue
        lhs = rows[n].lower
        if rows[n].counts:
            rhs = rows[n1].upper * rows[n2].upper
        else:
            rhs = rows[n1].upper + rows[n2].upper
        if lhs > rhs:
            out.append(Violation(n1, n2, lhs, rhs))
    return out


# -- conditional profiles --------------------------------------------------


def conditional_profile(fmap, delta, Ns: Sequence[int], epss: Sequence) -> ProfileTable:
    """Brackets for ``sup_y #(pi^-1(B_delta(y, d'_N)), d_N, eps)``.

    Maps exposing ``conditional_counts`` are handled in closed form; other
    maps must expose ``a``, ``q`` and ``apply_symbol`` and are enumerated
    over quantized words (see :func:`enumerated_conditional_counts`).
    """
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    rows = []
    notes = ["sup over y restricted to images of quantized points (lower end)"]
    closed = hasattr(fmap, "conditional_counts")
    if not closed:
        notes.append("upper end valid for the quantized domain only")
    for N in sorted(set(Ns)):
        for eps in sorted({Fraction(e) for e in epss}, reverse=True):
            if closed:
                lo, hi = fmap.conditional_counts(N, eps, delta)
            else:
                lo, hi = enumerated_conditional_counts(fmap, N, eps, delta)
            rows.append(ProfileRow(N, eps, lo, hi))
    sid = getattr(fmap, "map_id", type(fmap).__name__)
    return ProfileTable(
        f"{sid}, delta={format_rational(delta)}",
        rows,
        rate_overhead=None,
        notes=tuple(notes),
        extra={"delta": format_rational(delta)},
    )


def _zero_fill_words(a: int, q: int, N: int, cap: int) -> list[LatticeWord]:
    side = (1 << q) + 1
    total = side ** (a * N)
    if total > cap:
        raise CapExceeded(f"{total} quantized words exceed the cap {cap}")
    axis = [Dyadic.from_parts(k, q) for k in range(side)]
    syms = [DyadicVec(v) for v in itertools.product(axis, repeat=a)]
    return [LatticeWord.from_symbols(w, a=a) for w in itertools.product(syms, repeat=N)]


def enumerated_conditional_counts(fmap, N: int, eps: Fraction, delta: Fraction, cap: int = 4096):
    """Enumerate zero-fill quantized words on ``[0, N-1]``.

    For each image ``y`` of a domain word, the words whose image is surely
    within ``delta`` give a lower bound; those possibly within give the
    upper end. Returns the maxima over ``y``.
    """
    # m >= N makes every zero-fill distance exact
    m = max(tail_horizon(min(eps, delta)), N)
    words = _zero_fill_words(fmap.a, fmap.q, N, cap)
    images = [fmap.apply(w) for w in words]
    ilo, ihi, iscale = word_distance_matrix(images, N, m)
    dlo, dhi, dscale = word_distance_matrix(words, N, m)
    space = FiniteMetricSpace(range(len(words)), dlo, dhi, dscale, validate=False)
    thr_num, thr_den = delta.numerator * iscale, delta.denominator
    best_lo = best_hi = 0
    seen = set()
    for y in range(len(words)):
        sure = tuple(int(i) for i in (ihi[y] * thr_den < thr_num).nonzero()[0])
        maybe = tuple(int(i) for i in (ilo[y] * thr_den < thr_num).nonzero()[0])
        key = (sure, maybe)
        if key in seen:
            continue
        seen.add(key)
        if sure:
            best_lo = max(best_lo, cover_bounds(space.subspace(sure), eps).lower)
        if maybe:
            best_hi = max(best_hi, cover_bounds(space.subspace(maybe), eps).upper)
    return best_lo, max(best_lo, best_hi)


def subgrid_separated_count(q: int, length, eps) -> int:
    """Largest ``eps``-separated subset of the resolution-``q`` grid inside ``[0, length]``."""
    pts = math.floor(Fraction(length) * (1 << q)) + 1
    run = math.ceil(Fraction(eps) * (1 << q))
    return -(-pts // run)


def window_interval_count(length, eps) -> int:
    """Cover count of an interval of the given length by parts of diameter ``< eps``."""
    return interval_cover_count(min(Fraction(1), Fraction(length)), eps)
