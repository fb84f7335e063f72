"""Block systems ``X(K)`` and their covering bounds.

``X(K)`` holds the sequences that, for some phase, split into consecutive
length-``N`` blocks all drawn from ``K``. For the bound on
``#(X(K), d_L, eps)`` each phase class is covered by prescribing, up to
``eps/9``, the blocks that meet the window ``[-m, L+m-1]``.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .covering import FiniteMetricSpace, cover_bounds, cover_number_greedy
from .geometry import DyadicVec, format_rational, interval_cover_count, linf_dist, parse_rational
from .shift import PERIODIC, LatticeWord, word_distance_matrix

EXPLICIT = "explicit"
BOX = "box"

Block = tuple[DyadicVec, ...]


def _as_block(b) -> Block:
    return tuple(s if isinstance(s, DyadicVec) else DyadicVec(s) for s in b)


def block_dist(u: Block, v: Block) -> Fraction:
    return max(Fraction(linf_dist(s, t)) for s, t in zip(u, v))


@dataclass(frozen=True)
class BlockSet:
    """Either an explicit finite set of blocks or a product of per-slot boxes.

    A box slot is a tuple of ``(lo, hi)`` per coordinate; a slot with
    ``lo == hi`` everywhere is fixed.
    """

    a: int
    N: int
    kind: str
    blocks: tuple[Block, ...] = ()
    slots: tuple[tuple[tuple[Fraction, Fraction], ...], ...] = ()

    @classmethod
    def explicit(cls, blocks: Sequence, a: int | None = None) -> "BlockSet":
        bl = sorted({_as_block(b) for b in blocks})
        if not bl:
            raise ValueError("explicit block set is empty")
        N = len(bl[0])
        a = len(bl[0][0]) if a is None else a
        for b in bl:
            if len(b) != N or any(len(s) != a for s in b):
                raise ValueError("blocks differ in length or symbol dimension")
        return cls(a, N, EXPLICIT, blocks=tuple(bl))

    @classmethod
    def box(cls, slots: Sequence) -> "BlockSet":
        norm = []
        for slot in slots:
            norm.append(tuple((Fraction(lo), Fraction(hi)) for lo, hi in slot))
        if not norm:
            raise ValueError("box block set needs at least one slot")
        a = len(norm[0])
        for slot in norm:
            if len(slot) != a:
                raise ValueError("slots differ in dimension")
            for lo, hi in slot:
                if not 0 <= lo <= hi <= 1:
                    raise ValueError("slot interval must satisfy 0 <= lo <= hi <= 1")
        return cls(a, len(norm), BOX, slots=tuple(norm))

    @classmethod
    def cube(cls, a: int, N: int) -> "BlockSet":
        return cls.box([[(0, 1)] * a] * N)

    def contains(self, block: Sequence) -> bool:
        b = _as_block(block)
        if len(b) != self.N:
            return False
        if self.kind == EXPLICIT:
            return b in self._block_set
        return all(lo <= c <= hi for sym, slot in zip(b, self.slots) for c, (lo, hi) in zip(sym, slot))

    @property
    def _block_set(self) -> frozenset:
        # cached on first use; the dataclass is frozen
        s = self.__dict__.get("_bs")
        if s is None:
            s = frozenset(self.blocks)
            object.__setattr__(self, "_bs", s)
        return s

    def free_slots(self) -> list[int]:
        if self.kind != BOX:
            raise ValueError("free slots are defined for box block sets")
        return [i for i, slot in enumerate(self.slots) if any(lo != hi for lo, hi in slot)]

    def to_json(self) -> dict:
        out = {"a": self.a, "N": self.N, "kind": self.kind}
        if self.kind == EXPLICIT:
            out["blocks"] = [[s.to_json() for s in b] for b in self.blocks]
        else:
            out["slots"] = [[[format_rational(lo), format_rational(hi)] for lo, hi in slot] for slot in self.slots]
        return out

    @classmethod
    def from_json(cls, d: dict) -> "BlockSet":
        if d["kind"] == EXPLICIT:
            return cls.explicit([[DyadicVec.from_json(s) for s in b] for b in d["blocks"]], a=int(d["a"]))
        if d["kind"] == BOX:
            return cls.box([[(parse_rational(lo), parse_rational(hi)) for lo, hi in slot] for slot in d["slots"]])
        raise ValueError(f"unknown block set kind {d['kind']!r}")


@dataclass(frozen=True)
class Membership:
    member: bool
    phase: int | None

    def __bool__(self) -> bool:
        return self.member


def block_membership(x: LatticeWord, K: BlockSet, horizon: int | None = None) -> Membership:
    """Decide ``x in X(K)`` for a periodic word; reports an accepting phase."""
    if x.extension != PERIODIC:
        raise ValueError("membership is only decidable for periodic words")
    if x.a != K.a:
        raise ValueError("alphabet dimension mismatch")
    cycle = math.lcm(x.period, K.N)
    if horizon is not None and horizon % cycle:
        raise ValueError(f"horizon must be a multiple of lcm(period, N) = {cycle}")
    for phase in range(K.N):
        ok = all(
            K.contains([x.at(phase + k * K.N + i) for i in range(K.N)])
            for k in range(cycle // K.N)
        )
        if ok:
            return Membership(True, phase)
    return Membership(False, None)


def lemma51_horizon(eps) -> int:
    """Smallest ``m`` with ``2^(1-m) <= 2 eps / 3``.

    With blocks prescribed to within ``eps/9`` the weighted window sum stays
    below ``eps/3``, so this tail is small enough for a diameter below ``eps``.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = 0
    while Fraction(2, 1 << m) > 2 * eps / 3:
        m += 1
    return m


def lemma51_bound(cover_count_K: int, N: int, L: int, eps, m: int | None = None) -> int:
    """``N * C^(ceil((L + 2m)/N) + 2)``."""
    if cover_count_K < 1 or N < 1 or L < 1:
        raise ValueError("need cover count, N and L all >= 1")
    m = lemma51_horizon(eps) if m is None else m
    return N * cover_count_K ** (-(-(L + 2 * m) // N) + 2)


def block_cover_count(K: BlockSet, mesh) -> int:
    """Upper bound on ``#(K, l_inf, mesh)``."""
    mesh = Fraction(mesh)
    if K.kind == BOX:
        return math.prod(interval_cover_count(hi - lo, mesh) for slot in K.slots for lo, hi in slot)
    space = FiniteMetricSpace.from_function(list(K.blocks), block_dist, validate=False)
    return cover_bounds(space, mesh).upper


def sample_words(K: BlockSet, blocks_per_word: int = 2, cap: int = 200, seed: int = 0) -> list[LatticeWord]:
    """Periodic words built from ``blocks_per_word`` blocks of an explicit ``K``, at every phase."""
    if K.kind != EXPLICIT:
        raise ValueError("word sampling needs an explicit block set")
    combos = list(itertools.product(K.blocks, repeat=blocks_per_word))
    words = []
    for combo in combos:
        syms = tuple(s for b in combo for s in b)
        for phase in range(K.N):
            words.append(LatticeWord(K.a, phase, phase + len(syms) - 1, syms, PERIODIC))
    if len(words) > cap:
        words = random.Random(seed).sample(words, cap)
    return words


@dataclass(frozen=True)
class BlockBoundReport:
    formula: int
    cover_count_K: int
    m: int
    direct: int | None
    sample_size: int | None

    @property
    def dominated(self) -> bool | None:
        return None if self.direct is None else self.direct <= self.formula

    def to_json(self) -> dict:
        return {
            "formula": str(self.formula),
            "cover_count_K": str(self.cover_count_K),
            "m": self.m,
            "direct": None if self.direct is None else str(self.direct),
            "sample_size": self.sample_size,
            "direct_le_formula": self.dominated,
        }


def block_cover_upper(K: BlockSet, L: int, eps, direct: bool = True, cap: int = 200, seed: int = 0) -> BlockBoundReport:
    """Formula bound, plus a greedy cover of a sample of ``X(K)`` under ``d_L`` when ``K`` is explicit."""
    eps = Fraction(eps)
    C = block_cover_count(K, eps / 9)
    m = lemma51_horizon(eps)
    formula = lemma51_bound(C, K.N, L, eps, m)
    if not direct or K.kind != EXPLICIT:
        return BlockBoundReport(formula, C, m, None, None)
    words = sample_words(K, cap=cap, seed=seed)
    # generous horizon so the distance enclosures are nearly exact
    horizon = max(m, L) + 2 * K.N + 8
    lo, hi, scale = word_distance_matrix(words, L, horizon)
    space = FiniteMetricSpace(range(len(words)), lo, hi, scale, validate=False)
    greedy = cover_number_greedy(space, eps)
    return BlockBoundReport(formula, C, m, greedy.upper, len(words))
