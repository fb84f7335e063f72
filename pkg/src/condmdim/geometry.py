"""Exact dyadic coordinates and the sup-norm on alphabet cubes.

Every coordinate handled by the library is a dyadic rational ``k / 2**q``.
Keeping coordinates dyadic makes strict threshold tests such as
``diam < eps`` exact, with no floating-point boundary cases.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

#: Default cap on the number of grid points :func:`enumerate_grid` will yield.
GRID_ENUMERATION_CAP = 1_000_000


class CapExceeded(RuntimeError):
    """An enumeration or exact search would exceed its configured size cap."""


class Dyadic(Fraction):
    """A rational number whose reduced denominator is a power of two.

    Subclassing :class:`~fractions.Fraction` gives exact arithmetic, value
    equality and hashing for free. Arithmetic results come back as plain
    ``Fraction``; wrap them with ``Dyadic(...)`` where dyadicity matters.
    """

    __slots__ = ()

    def __new__(cls, numerator=0, denominator=None):
        self = super().__new__(cls, numerator, denominator)
        den = self.denominator
        if den & (den - 1):
            raise ValueError(f"{self} is not a dyadic rational")
        return self

    @classmethod
    def from_parts(cls, num: int, q: int) -> "Dyadic":
        if q < 0:
            raise ValueError("resolution exponent must be >= 0")
        return cls(num, 1 << q)

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        """Parse ``"3/8"``, ``"3/2^3"``, ``"1"`` or ``"0.375"``."""
        s = str(text).strip()
        if "^" in s:
            num, _, rest = s.partition("/")
            base, _, exp = rest.partition("^")
            if base.strip() != "2":
                raise ValueError(f"malformed dyadic {text!r}")
            return cls.from_parts(int(num), int(exp))
        return cls(Fraction(s))

    @property
    def q(self) -> int:
        """Resolution exponent of the reduced form."""
        return self.denominator.bit_length() - 1

    @property
    def num(self) -> int:
        return self.numerator

    def at(self, q: int) -> int:
        """Numerator of this value over ``2**q``; ``q`` must be fine enough."""
        if q < self.q:
            raise ValueError(f"{self} is not representable at resolution {q}")
        return self.numerator << (q - self.q)

    def __repr__(self) -> str:
        return f"Dyadic({self})"


def dyadic(x) -> Dyadic:
    """Coerce an int, Fraction or string to :class:`Dyadic`."""
    if isinstance(x, Dyadic):
        return x
    if isinstance(x, str):
        return Dyadic.parse(x)
    if isinstance(x, float):
        return Dyadic(Fraction(x))
    return Dyadic(x)


def format_rational(x: Fraction | int) -> str:
    """Exact string form used in every serialized output (``"3/8"``, ``"1"``)."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text) -> Fraction:
    """Parse an exact rational; floats are rejected to keep outputs exact."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    s = str(text).strip()
    if "^" in s:
        return Fraction(Dyadic.parse(s))
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"malformed rational {text!r}") from exc


class DyadicVec(tuple):
    """A point of the alphabet cube ``[0,1]^a`` with dyadic coordinates."""

    __slots__ = ()

    def __new__(cls, coords: Iterable = ()):
        vals = tuple(dyadic(c) for c in coords)
        for v in vals:
            if v < 0 or v > 1:
                raise ValueError(f"coordinate {v} outside [0, 1]")
        return super().__new__(cls, vals)

    @classmethod
    def zeros(cls, dim: int) -> "DyadicVec":
        return _zero_vec(dim)

    @property
    def coords(self) -> tuple[Dyadic, ...]:
        return tuple(self)

    @property
    def dim(self) -> int:
        return len(self)

    @property
    def q(self) -> int:
        """Common resolution exponent (finest among the coordinates)."""
        return max((c.q for c in self), default=0)

    def at(self, q: int) -> tuple[int, ...]:
        return tuple(c.at(q) for c in self)

    def to_json(self) -> list[str]:
        return [format_rational(c) for c in self]

    @classmethod
    def from_json(cls, data) -> "DyadicVec":
        return cls(Dyadic.parse(str(c)) for c in data)

    def __repr__(self) -> str:
        return "DyadicVec(" + ", ".join(format_rational(c) for c in self) + ")"


_ZERO_CACHE: dict[int, DyadicVec] = {}


def _zero_vec(dim: int) -> DyadicVec:
    v = _ZERO_CACHE.get(dim)
    if v is None:
        v = _ZERO_CACHE[dim] = DyadicVec([0] * dim)
    return v


def linf_dist(u: DyadicVec, v: DyadicVec) -> Dyadic:
    """Exact sup-norm distance ``max_i |u_i - v_i|``."""
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")
    return Dyadic(max((abs(x - y) for x, y in zip(u, v)), default=Fraction(0)))


@dataclass(frozen=True)
class QGrid:
    """The grid ``{0, 1/2^q, ..., 1}^dim``."""

    dim: int
    q: int

    def __post_init__(self):
        if self.dim < 0 or self.q < 0:
            raise ValueError("grid dimension and resolution must be >= 0")

    @property
    def side(self) -> int:
        return (1 << self.q) + 1

    @property
    def count(self) -> int:
        return self.side ** self.dim

    def to_json(self) -> dict:
        return {"dim": self.dim, "q": self.q}

    @classmethod
    def from_json(cls, data: dict) -> "QGrid":
        return cls(int(data["dim"]), int(data["q"]))


def enumerate_grid(g: QGrid, cap: int = GRID_ENUMERATION_CAP) -> Iterator[DyadicVec]:
    """Yield every grid point once, lexicographic in the numerators."""
    if g.count > cap:
        raise CapExceeded(f"grid has {g.count} points, cap is {cap}")
    axis = [Dyadic.from_parts(k, g.q) for k in range(g.side)]
    for pt in itertools.product(axis, repeat=g.dim):
        yield DyadicVec(pt)


def axis_cover_count(q: int, eps) -> int:
    """Minimum number of diameter-``< eps`` sets covering the 1-D grid at resolution ``q``.

    An optimal cover uses consecutive runs, each holding at most
    ``ceil(eps * 2**q)`` grid points.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    points = (1 << q) + 1
    run = math.ceil(eps * (1 << q))
    return -(-points // run)


def interval_cover_count(length, eps) -> int:
    """Covering number of a closed real interval by sets of diameter ``< eps``.

    Equals ``floor(length / eps) + 1``; the points ``0, eps, 2 eps, ...``
    form a matching separated set, so the value is exact.
    """
    length, eps = Fraction(length), Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if length < 0:
        raise ValueError("negative interval length")
    return math.floor(length / eps) + 1


def box_cover_count(side, mesh) -> int:
    """Number of closed intervals of length ``mesh`` needed to tile an interval of length ``side``."""
    side, mesh = Fraction(side), Fraction(mesh)
    if side == 0:
        return 1
    return math.ceil(side / mesh)
