"""Coordinatewise factor maps between full shifts and their fiber slopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .estimators import LogRatio, ProfileRow, ProfileTable, subgrid_separated_count, window_interval_count
from .geometry import DyadicVec, axis_cover_count, box_cover_count, format_rational, linf_dist
from .shift import ZERO, LatticeWord, paired_distance_bounds, tail_horizon


def _power_of_two_exponent(eps: Fraction) -> int:
    eps = Fraction(eps)
    if eps.numerator != 1 or eps.denominator & (eps.denominator - 1) or eps >= 1:
        raise ValueError(f"eps must be 2^-k with k >= 1, got {format_rational(eps)}")
    return eps.denominator.bit_length() - 1


def default_resolution(eps) -> int:
    """Smallest ``q`` with ``2^-q <= eps/2``."""
    eps = Fraction(eps)
    q = 0
    while Fraction(1, 1 << q) > eps / 2:
        q += 1
    return q


@dataclass(frozen=True)
class CoordinatewiseMap:
    """``(x_n) -> (f(x_n))`` for a symbol map ``f: [0,1]^a -> [0,1]^b``."""

    a: int
    b: int
    f: Callable[[DyadicVec], DyadicVec]
    q: int = 2
    map_id: str = "coordinatewise"

    def apply(self, x: LatticeWord) -> LatticeWord:
        if x.a != self.a:
            raise ValueError(f"word has dimension {x.a}, map expects {self.a}")
        syms = tuple(DyadicVec(self.f(s)) for s in x.symbols)
        return LatticeWord(self.b, x.lo, x.hi, syms, x.extension)


def identity_map(a: int, q: int = 2) -> CoordinatewiseMap:
    return CoordinatewiseMap(a, a, lambda s: s, q, map_id=f"identity(a={a})")


@dataclass(frozen=True)
class ProjectionFactor:
    """Projection of ``([0,1]^a)^Z`` onto the first ``b`` coordinates of every symbol."""

    a: int
    b: int
    q: int | None = None

    def __post_init__(self):
        if not 0 <= self.b <= self.a:
            raise ValueError("need 0 <= b <= a")

    @property
    def map_id(self) -> str:
        return f"projection(a={self.a}, b={self.b})"

    def apply(self, x: LatticeWord) -> LatticeWord:
        return apply_factor(self, x)

    def resolution(self, eps) -> int:
        q = default_resolution(eps) if self.q is None else self.q
        if Fraction(1, 1 << q) > Fraction(eps) / 2:
            raise ValueError(f"q={q} too coarse for eps={format_rational(eps)}")
        return q

    def conditional_counts(self, N: int, eps, delta) -> tuple[int, int]:
        """Closed-form bracket for ``sup_y #(pi^-1(B_delta(y, d'_N)), d_N, eps)``.

        Lower: about ``y = pi(0)``, quantized words on ``[0, N-1]`` whose free
        coordinates range over the whole grid and whose fixed coordinates
        stay in ``[0, delta/3]`` all lie in the preimage, and a product of
        separated grids among them is ``eps``-separated.

        Upper: in the preimage the fixed coordinate at window index ``i`` lies
        within ``2^dist(i) * delta`` of ``y_i``, ``dist`` being the distance of
        ``i`` to ``[0, N-1]``. Parts whose window sup-distance is below
        ``eps/6`` on ``[-m, N+m-1]`` have ``d_N`` diameter below ``eps``.
        """
        eps, delta = Fraction(eps), Fraction(delta)
        q = self.resolution(eps)
        free, fixed = self.a - self.b, self.b
        lower = axis_cover_count(q, eps) ** (free * N)
        lower *= subgrid_separated_count(q, min(Fraction(1), delta / 3), eps) ** (fixed * N)
        m = tail_horizon(eps)
        upper = box_cover_count(1, eps / 6) ** (free * (N + 2 * m))
        for i in range(-m, N + m):
            dist = max(0, -i, i - (N - 1))
            upper *= window_interval_count((1 << (dist + 1)) * delta, eps / 6) ** fixed
        return lower, upper


def apply_factor(p: ProjectionFactor, x: LatticeWord) -> LatticeWord:
    if x.a != p.a:
        raise ValueError(f"word has dimension {x.a}, projection expects {p.a}")
    syms = tuple(DyadicVec(s[: p.b]) for s in x.symbols)
    return LatticeWord(p.b, x.lo, x.hi, syms, x.extension)


@dataclass(frozen=True)
class SlopeBracket:
    """``log2(count) / (N k)`` at ``eps = 2^-k`` for the two counts."""

    eps: Fraction
    N: int
    m: int
    count_lower: int
    count_upper: int

    @property
    def k(self) -> int:
        return _power_of_two_exponent(self.eps)

    def _ratio(self, count: int) -> LogRatio:
        return LogRatio(count, self.N * self.k)

    @property
    def lower(self) -> float:
        return math.log2(self.count_lower) / (self.N * self.k)

    @property
    def upper(self) -> float:
        return math.log2(self.count_upper) / (self.N * self.k)

    def lower_at_least(self, r) -> bool:
        return self._ratio(self.count_lower).at_least_log2(r)

    def upper_at_most(self, r) -> bool:
        return self._ratio(self.count_upper).at_most_log2(r)

    def upper_below(self, other: "SlopeBracket") -> bool:
        """Strict ``self.upper < other.upper``, decided exactly."""
        return self._ratio(self.count_upper) < other._ratio(other.count_upper)

    def to_row(self) -> ProfileRow:
        return ProfileRow(self.N, self.eps, self.count_lower, self.count_upper)


def fiber_cover_bracket(p: ProjectionFactor, N: int, eps, q: int | None = None) -> SlopeBracket:
    """Slope bracket for the worst fiber of the projection.

    All fibers are isometric, so no search over ``y`` is needed.
    """
    eps = Fraction(eps)
    k = _power_of_two_exponent(eps)
    q = (k + 1) if q is None else q
    if q < k + 1:
        raise ValueError(f"need q >= k+1 = {k + 1}, got {q}")
    if N < 1:
        raise ValueError("N must be >= 1")
    m = tail_horizon(eps)
    free = p.a - p.b
    lower = axis_cover_count(q, eps) ** (free * N)
    upper = box_cover_count(1, eps / 6) ** (free * (N + 2 * m))
    return SlopeBracket(eps, N, m, lower, upper)


def bracket_table(p: ProjectionFactor, brackets: Sequence[SlopeBracket]) -> ProfileTable:
    return ProfileTable(
        f"{p.map_id} fiber",
        [b.to_row() for b in brackets],
        rate_overhead=0,
        extra={"a": p.a, "b": p.b},
    )


# -- expansion hypothesis --------------------------------------------------


@dataclass(frozen=True)
class PsiLevel:
    """One embedding ``psi: ([0,1]^a)^M -> shift`` with its horizon ``N``."""

    N: int
    M: int
    a: int
    psi: Callable[[tuple[DyadicVec, ...]], LatticeWord]

    @property
    def ratio(self) -> Fraction:
        """Scalar dimension per step, ``a * M / N``."""
        return Fraction(self.a * self.M, self.N)


def point_dist(x: Sequence[DyadicVec], y: Sequence[DyadicVec]) -> Fraction:
    if len(x) != len(y):
        raise ValueError("points differ in length")
    return max((Fraction(linf_dist(u, v)) for u, v in zip(x, y)), default=Fraction(0))


@dataclass
class HypothesisReport:
    passed: bool
    checked: int
    ratios: list[Fraction]
    violations: list[dict]

    @property
    def trend(self) -> str:
        r = self.ratios
        if all(u == v for u, v in zip(r, r[1:])):
            return "constant"
        if all(u >= v for u, v in zip(r, r[1:])):
            return "non-increasing"
        if all(u <= v for u, v in zip(r, r[1:])):
            return "non-decreasing"
        return "mixed"

    def to_json(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "invariant": "expansion",
            "checked_pairs": self.checked,
            "ratios": [format_rational(r) for r in self.ratios],
            "trend": self.trend,
            "violations": self.violations,
        }


def expansion_violations(level: PsiLevel, pairs, m: int = 0, index: int = 0) -> tuple[int, list[dict]]:
    """Pairs with ``||x - y|| > d_N(psi x, psi y).lo``.

    The exact part of the enclosure already contains the window terms, so a
    small tail horizon ``m`` suffices.
    """
    pairs = list(pairs)
    xs = [level.psi(x) for x, _ in pairs]
    ys = [level.psi(y) for _, y in pairs]
    lo, _, scale = paired_distance_bounds(xs, ys, level.N, m)
    bad = []
    for (x, y), v in zip(pairs, lo):
        gap = point_dist(x, y)
        if gap > Fraction(int(v), scale):
            bad.append({
                "level": index,
                "x": [s.to_json() for s in x],
                "y": [s.to_json() for s in y],
                "norm": format_rational(gap),
                "dN_lo": format_rational(Fraction(int(v), scale)),
            })
    return len(pairs), bad


def hypothesis_check(family: Sequence[PsiLevel], pairs: Sequence) -> HypothesisReport:
    """Check the expansion inequality level by level; ``pairs[i]`` belongs to ``family[i]``."""
    total, bad = 0, []
    for i, (level, ps) in enumerate(zip(family, pairs)):
        n, v = expansion_violations(level, ps, index=i)
        total += n
        bad.extend(v)
    return HypothesisReport(not bad, total, [lv.ratio for lv in family], bad)


def fullshift_embedding(a: int, n: int) -> PsiLevel:
    """``(x_0, ..., x_{n-1})`` placed at indices ``0..n-1`` of a zero-filled word."""

    def psi(x):
        if len(x) != n:
            raise ValueError(f"expected {n} symbols")
        return LatticeWord.from_symbols(x, a=a)

    return PsiLevel(n, n, a, psi)


def with_fixed_point(level: PsiLevel, p: DyadicVec) -> PsiLevel:
    """``x -> (psi(x), p)``: append the constant orbit of ``p`` to every symbol.

    Periodic images take any constant; zero-filled ones need ``p = 0`` to
    remain a finitely described word.
    """
    p = DyadicVec(p)

    def psi(x):
        w = level.psi(x)
        if w.extension == ZERO and any(p):
            raise ValueError("zero-filled image needs the zero fixed point")
        syms = tuple(DyadicVec(tuple(s) + tuple(p)) for s in w.symbols)
        return LatticeWord(w.a + len(p), w.lo, w.hi, syms, w.extension)

    return PsiLevel(level.N, level.M, level.a, psi)


def collapsed(level: PsiLevel) -> PsiLevel:
    """A deliberately broken embedding: the first symbol is forgotten."""

    def psi(x):
        return level.psi((DyadicVec.zeros(level.a),) + tuple(x[1:]))

    return PsiLevel(level.N, level.M, level.a, psi)
