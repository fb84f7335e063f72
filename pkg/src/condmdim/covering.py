"""Covering numbers of finite metric spaces with certified bounds.

``#(E, d, eps)`` is the least number of sets of diameter strictly below
``eps`` covering ``E``; it is 0 for the empty set. Distances may be exact
or known only up to an interval. A pair may share a cover part only when its
upper distance is ``< eps``; a pair counts as separated only when its lower
distance is ``>= eps``. Both certificates therefore stay valid when
distances are uncertain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np

from .geometry import CapExceeded, format_rational
from .shift import BoundedValue

EXACT_CAP = 24


@dataclass(frozen=True)
class CoverResult:
    """Bracket ``lower <= #(E, d, eps) <= upper`` with optional certificates."""

    lower: int
    upper: int
    exact: bool = False
    cover_certificate: tuple[tuple[int, ...], ...] | None = None
    separated_certificate: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")
        if self.exact and self.lower != self.upper:
            raise ValueError("exact result must have lower == upper")

    def to_json(self, certificates: bool = False) -> dict:
        out = {"lower": self.lower, "upper": self.upper, "exact": self.exact}
        if certificates:
            out["cover_certificate"] = (
                None if self.cover_certificate is None else [list(p) for p in self.cover_certificate]
            )
            out["separated_certificate"] = (
                None if self.separated_certificate is None else list(self.separated_certificate)
            )
        return out


class FiniteMetricSpace:
    """Points with an exact or interval-valued distance table.

    Distances are stored as integer matrices ``lo``, ``hi`` over a common
    denominator ``scale``; for exact tables ``lo == hi``.
    """

    def __init__(self, points: Sequence[Hashable], lo, hi=None, scale: int = 1, validate: bool = True):
        self.points = list(points)
        n = len(self.points)
        self.lo = np.asarray(lo, dtype=object if _needs_object(lo) else np.int64).reshape(n, n)
        self.hi = self.lo if hi is None else np.asarray(
            hi, dtype=object if _needs_object(hi) else np.int64
        ).reshape(n, n)
        self.scale = int(scale)
        if validate:
            self.validate()

    @classmethod
    def from_table(cls, points: Sequence[Hashable], table, validate: bool = True) -> "FiniteMetricSpace":
        """Build from a square table of rationals or :class:`BoundedValue` entries."""
        n = len(points)
        los, his = [], []
        for row in table:
            if len(row) != n:
                raise ValueError("distance table is not square")
            for v in row:
                if isinstance(v, BoundedValue):
                    los.append(v.lo)
                    his.append(v.hi)
                else:
                    los.append(Fraction(v))
                    his.append(Fraction(v))
        if len(los) != n * n:
            raise ValueError("distance table is not square")
        scale = math.lcm(*(x.denominator for x in los + his)) if los else 1
        lo = [int(x * scale) for x in los]
        hi = [int(x * scale) for x in his]
        return cls(points, lo, hi, scale, validate=validate)

    @classmethod
    def from_function(cls, points: Sequence, dist: Callable, validate: bool = True) -> "FiniteMetricSpace":
        table = [[dist(p, r) for r in points] for p in points]
        return cls.from_table(points, table, validate=validate)

    def __len__(self) -> int:
        return len(self.points)

    def validate(self, triangle_cap: int = 400) -> None:
        n = len(self)
        if n == 0:
            return
        lo, hi = self.lo, self.hi
        if (lo > hi).any():
            raise ValueError("distance interval with lo > hi")
        if (lo < 0).any():
            raise ValueError("negative distance")
        if (lo != lo.T).any() or (hi != hi.T).any():
            raise ValueError("distance table is not symmetric")
        if (np.diagonal(lo) != 0).any():
            raise ValueError("non-zero diagonal")
        off = ~np.eye(n, dtype=bool)
        if (hi[off] == 0).any():
            raise ValueError("distinct points at distance zero")
        if n <= triangle_cap:
            # d(x,z) <= d(x,y) + d(y,z) must be possible for some values in the intervals
            for y in range(n):
                bound = hi[:, y][:, None] + hi[y, :][None, :]
                if (lo > bound).any():
                    raise ValueError("triangle inequality violated")

    def close_graph(self, eps, certain: bool = True) -> list[int]:
        """Adjacency bitmasks: ``i ~ j`` iff ``d(i, j) < eps``.

        With ``certain`` the test uses the upper distance (pair surely close),
        otherwise the lower distance (pair possibly close).
        """
        eps = Fraction(eps)
        mat = self.hi if certain else self.lo
        close = (mat * eps.denominator) < (eps.numerator * self.scale)
        masks = []
        for i in range(len(self)):
            row = close[i]
            bits = 0
            for j in np.flatnonzero(row):
                if j != i:
                    bits |= 1 << int(j)
            masks.append(bits)
        return masks

    def separated_matrix(self, eps) -> np.ndarray:
        """``True`` where the pair is certainly at distance ``>= eps``."""
        eps = Fraction(eps)
        return (self.lo * eps.denominator) >= (eps.numerator * self.scale)

    def subspace(self, idx: Sequence[int]) -> "FiniteMetricSpace":
        idx = list(idx)
        sub = np.ix_(idx, idx)
        return FiniteMetricSpace(
            [self.points[i] for i in idx], self.lo[sub], self.hi[sub], self.scale, validate=False
        )

    def distance(self, i: int, j: int) -> BoundedValue:
        return BoundedValue(Fraction(int(self.lo[i, j]), self.scale), Fraction(int(self.hi[i, j]), self.scale))


def _needs_object(x) -> bool:
    arr = np.asarray(x, dtype=object)
    if arr.size == 0:
        return False
    return max(abs(int(v)) for v in arr.ravel()) >= 1 << 62


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _maximal_cliques(adj: list[int], universe: int) -> list[int]:
    """Bron-Kerbosch with pivoting; cliques returned as bitmasks, sorted."""
    out: list[int] = []

    def expand(r: int, p: int, x: int) -> None:
        if not p and not x:
            out.append(r)
            return
        pivot_pool = p | x
        pivot = max(_bits(pivot_pool), key=lambda u: (bin(adj[u] & p).count("1"), -u))
        for v in _bits(p & ~adj[pivot]):
            bit = 1 << v
            expand(r | bit, p & adj[v], x & adj[v])
            p &= ~bit
            x |= bit

    expand(0, universe, 0)
    return sorted(out)


def _greedy_independent(adj: list[int], candidates: int) -> int:
    """Size of a greedy independent set inside ``candidates`` (lowest id first)."""
    count = 0
    while candidates:
        low = candidates & -candidates
        v = low.bit_length() - 1
        count += 1
        candidates &= ~(adj[v] | low)
    return count


def _max_independent(adj: list[int], candidates: int) -> int:
    """Maximum independent set inside ``candidates``, as a bitmask."""
    best = 0
    best_size = 0

    def rec(cands: int, chosen: int, size: int) -> None:
        nonlocal best, best_size
        if not cands:
            if size > best_size:
                best, best_size = chosen, size
            return
        if size + bin(cands).count("1") <= best_size:
            return
        low = cands & -cands
        v = low.bit_length() - 1
        rec(cands & ~(adj[v] | low), chosen | low, size + 1)
        # skipping v only helps if v has a neighbour among the candidates
        if adj[v] & cands:
            rec(cands & ~low, chosen, size)

    rec(candidates, 0, 0)
    return best


def _min_clique_cover(adj: list[int], n: int) -> list[int]:
    """Exact minimum clique cover by branch and bound over maximal cliques."""
    universe = (1 << n) - 1
    if n == 0:
        return []
    cliques = _maximal_cliques(adj, universe)
    by_vertex: list[list[int]] = [[] for _ in range(n)]
    for c in cliques:
        for v in _bits(c):
            by_vertex[v].append(c)
    best = _greedy_clique_cover(adj, n)
    best_len = len(best)

    def rec(uncovered: int, chosen: list[int]) -> None:
        nonlocal best, best_len
        if not uncovered:
            if len(chosen) < best_len:
                best, best_len = list(chosen), len(chosen)
            return
        if len(chosen) + _greedy_independent(adj, uncovered) >= best_len:
            return
        low = uncovered & -uncovered
        v = low.bit_length() - 1
        options = sorted(by_vertex[v], key=lambda c: (-bin(c & uncovered).count("1"), c))
        for c in options:
            chosen.append(c)
            rec(uncovered & ~c, chosen)
            chosen.pop()

    rec(universe, [])
    return best


def _greedy_clique_cover(adj: list[int], n: int) -> list[int]:
    """Greedy cover: repeatedly take the largest clique grown from an uncovered seed.

    A clique is grown from its seed by adding compatible uncovered points in
    id order. Ties between seeds go to the smallest id.
    """
    uncovered = (1 << n) - 1
    parts = []
    while uncovered:
        best_clique, best_size = 0, -1
        for seed in _bits(uncovered):
            clique = 1 << seed
            cands = uncovered & adj[seed]
            while cands:
                low = cands & -cands
                clique |= low
                cands &= adj[low.bit_length() - 1]
            size = bin(clique).count("1")
            if size > best_size:
                best_clique, best_size = clique, size
        parts.append(best_clique)
        uncovered &= ~best_clique
    return parts


def _partition(cliques: list[int], n: int) -> tuple[tuple[int, ...], ...]:
    """Turn a clique cover into a partition (each point in its first clique)."""
    seen = 0
    parts = []
    for c in cliques:
        part = c & ~seen
        seen |= c
        if part:
            parts.append(tuple(_bits(part)))
    if seen != (1 << n) - 1:
        raise AssertionError("cover does not cover every point")
    return tuple(parts)


def cover_number_exact(s: FiniteMetricSpace, eps, cap: int = EXACT_CAP) -> CoverResult:
    """Exact covering number with a partition certificate.

    With interval distances the surely-close graph gives the upper value and
    the possibly-close graph the lower value; they coincide (and the result
    is flagged exact) whenever no distance straddles ``eps``.
    """
    n = len(s)
    if n == 0:
        return CoverResult(0, 0, True, (), ())
    if n > cap:
        raise CapExceeded(f"{n} points exceed the exact cap {cap}; use bounds instead")
    sure = s.close_graph(eps, certain=True)
    maybe = s.close_graph(eps, certain=False)
    upper_cover = _min_clique_cover(sure, n)
    upper = len(upper_cover)
    lower = upper if sure == maybe else len(_min_clique_cover(maybe, n))
    sep = _max_independent(maybe, (1 << n) - 1)
    return CoverResult(
        lower,
        upper,
        lower == upper,
        _partition(upper_cover, n),
        tuple(_bits(sep)),
    )


def cover_number_greedy(s: FiniteMetricSpace, eps) -> CoverResult:
    """Sound upper bound from a greedy cover, with its partition certificate."""
    n = len(s)
    if n == 0:
        return CoverResult(0, 0, True, (), ())
    if n <= 2048:
        parts = _greedy_clique_cover(s.close_graph(eps, certain=True), n)
        cert = _partition(parts, n)
    else:
        cert = _greedy_partition_numpy(s, eps)
    lower = 1
    return CoverResult(lower, len(cert), len(cert) == lower, cert, None)


def _greedy_partition_numpy(s: FiniteMetricSpace, eps) -> tuple[tuple[int, ...], ...]:
    """Large-instance greedy: seed at the smallest uncovered id, grow in id order."""
    eps = Fraction(eps)
    close = (s.hi * eps.denominator) < (eps.numerator * s.scale)
    n = len(s)
    uncovered = np.ones(n, dtype=bool)
    parts = []
    while uncovered.any():
        seed = int(np.argmax(uncovered))
        cands = uncovered & close[seed]
        cands[seed] = False
        part = [seed]
        while cands.any():
            v = int(np.argmax(cands))
            part.append(v)
            cands &= close[v]
            cands[v] = False
        uncovered[part] = False
        parts.append(tuple(sorted(part)))
    return tuple(parts)


def separated_lower_bound(s: FiniteMetricSpace, eps, exact_cap: int = EXACT_CAP) -> CoverResult:
    """Lower bound from an ``eps``-separated subset.

    Points pairwise at distance ``>= eps`` must lie in distinct parts. Small
    spaces get a maximum separated set, larger ones a greedy maximal one.
    """
    n = len(s)
    if n == 0:
        return CoverResult(0, 0, True, (), ())
    if n <= exact_cap:
        maybe = s.close_graph(eps, certain=False)
        chosen = tuple(_bits(_max_independent(maybe, (1 << n) - 1)))
    else:
        sep = s.separated_matrix(eps)
        np.fill_diagonal(sep, True)
        alive = np.ones(n, dtype=bool)
        picked = []
        while alive.any():
            v = int(np.argmax(alive))
            picked.append(v)
            alive &= sep[v]
            alive[v] = False
        chosen = tuple(picked)
    return CoverResult(len(chosen), n, False, None, chosen)


def cover_bounds(s: FiniteMetricSpace, eps, exact_cap: int = EXACT_CAP) -> CoverResult:
    """Exact value when small enough, otherwise separated/greedy bracket."""
    if len(s) <= exact_cap:
        return cover_number_exact(s, eps, cap=exact_cap)
    low = separated_lower_bound(s, eps, exact_cap)
    up = cover_number_greedy(s, eps)
    return CoverResult(
        low.lower,
        up.upper,
        low.lower == up.upper,
        up.cover_certificate,
        low.separated_certificate,
    )


def product_cover_bounds(factors: Sequence[CoverResult]) -> CoverResult:
    """Bracket for a product space under the max metric.

    Products of cover parts cover the product, and products of separated
    sets are separated, so both ends multiply.
    """
    lower = math.prod(f.lower for f in factors)
    upper = math.prod(f.upper for f in factors)
    return CoverResult(lower, upper, lower == upper)


def verify_certificate(s: FiniteMetricSpace, eps, result: CoverResult) -> None:
    """Re-check the certificates of ``result`` from scratch; raises on failure."""
    eps = Fraction(eps)
    if result.cover_certificate is not None:
        covered = sorted(i for part in result.cover_certificate for i in part)
        if covered != list(range(len(s))):
            raise AssertionError("cover certificate is not a partition of the points")
        if len(result.cover_certificate) != result.upper:
            raise AssertionError("cover certificate size differs from upper")
        for part in result.cover_certificate:
            for i in part:
                for j in part:
                    if i != j and not s.distance(i, j).hi < eps:
                        raise AssertionError(f"part {part} has diameter >= eps")
    if result.separated_certificate is not None:
        pts = result.separated_certificate
        if len(pts) < result.lower and result.cover_certificate is None:
            raise AssertionError("separated certificate smaller than lower bound")
        for i in pts:
            for j in pts:
                if i != j and not s.distance(i, j).lo >= eps:
                    raise AssertionError(f"points {i}, {j} are not eps-separated")


def cover_result_from_json(d: dict) -> CoverResult:
    return CoverResult(int(d["lower"]), int(d["upper"]), bool(d["exact"]))


def space_from_json(d: dict) -> FiniteMetricSpace:
    """``{"points": [...], "dist": [[...]]}`` with exact rational strings or ``{"lo","hi"}`` entries."""
    from .geometry import parse_rational

    table = []
    for row in d["dist"]:
        out = []
        for v in row:
            if isinstance(v, dict):
                out.append(BoundedValue(parse_rational(v["lo"]), parse_rational(v["hi"])))
            else:
                out.append(parse_rational(v))
        table.append(out)
    return FiniteMetricSpace.from_table(d.get("points", list(range(len(table)))), table)


def space_to_json(s: FiniteMetricSpace) -> dict:
    n = len(s)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            b = s.distance(i, j)
            row.append(format_rational(b.lo) if b.is_point() else b.to_json())
        rows.append(row)
    return {"points": [str(p) for p in s.points], "dist": rows}
