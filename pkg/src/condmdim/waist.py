"""Waist checks for grid-interpolated maps ``f: [0,1]^n -> R^m``.

Maps are given by exact values at the nodes of the resolution-``q`` grid
and extended multilinearly on each cell. On a cell every coordinate of a
multilinear map lies between its smallest and largest corner value, so
the cells whose corner ranges contain ``t`` form an outer approximation of
the fiber ``f^-1(t)``.

Neighbourhood measures are computed exactly by rasterizing on a dyadic
grid fine enough that every box involved is a union of raster cells.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .geometry import Dyadic, format_rational, parse_rational
from .shift import BoundedValue


class GridMap:
    """Exact node values of a map on the ``(2^q + 1)^n`` grid.

    Values are kept as integer numerators over a common denominator so
    that all cell tests are integer comparisons.
    """

    def __init__(self, n: int, m: int, q: int, values, name: str = ""):
        self.n, self.m, self.q, self.name = int(n), int(m), int(q), name
        side = (1 << self.q) + 1
        vals = [tuple(Fraction(v) for v in row) for row in values]
        if len(vals) != side ** self.n:
            raise ValueError(f"expected {side ** self.n} node values, got {len(vals)}")
        if any(len(v) != self.m for v in vals):
            raise ValueError("node value has the wrong target dimension")
        self.den = math.lcm(*(v.denominator for row in vals for v in row)) if vals else 1
        nums = [[int(v * self.den) for v in row] for row in vals]
        big = max((abs(x) for row in nums for x in row), default=0) >= 1 << 60
        self.nums = np.array(nums, dtype=object if big else np.int64).reshape((side,) * self.n + (self.m,))

    @classmethod
    def from_function(cls, n: int, m: int, q: int, fn, name: str = "") -> "GridMap":
        side = (1 << q) + 1
        nodes = itertools.product(range(side), repeat=n)
        vals = [fn(tuple(Fraction(k, 1 << q) for k in node)) for node in nodes]
        return cls(n, m, q, vals, name)

    @property
    def side(self) -> int:
        return (1 << self.q) + 1

    @property
    def h(self) -> Fraction:
        return Fraction(1, 1 << self.q)

    def node_value(self, idx: Sequence[int]) -> tuple[Fraction, ...]:
        return tuple(Fraction(int(v), self.den) for v in self.nums[tuple(idx)])

    @cached_property
    def corner_stack(self) -> np.ndarray:
        """Array of shape ``(2^n, cells..., m)`` holding each cell's corner numerators."""
        c = 1 << self.q
        out = []
        for corner in itertools.product((0, 1), repeat=self.n):
            sl = tuple(slice(o, o + c) for o in corner)
            out.append(self.nums[sl])
        return np.stack(out)

    @cached_property
    def cell_min(self) -> np.ndarray:
        return self.corner_stack.min(axis=0)

    @cached_property
    def cell_max(self) -> np.ndarray:
        return self.corner_stack.max(axis=0)

    @cached_property
    def center_sum(self) -> np.ndarray:
        """Corner sums per cell; the cell-centre value is this over ``2^n * den``."""
        return self.corner_stack.sum(axis=0)

    def to_json(self) -> dict:
        flat = self.nums.reshape(-1, self.m)
        return {
            "n": self.n,
            "m": self.m,
            "q": self.q,
            "name": self.name,
            "values": [format_rational(Fraction(int(v), self.den)) for row in flat for v in row],
        }

    @classmethod
    def from_json(cls, d: dict) -> "GridMap":
        n, m, q = int(d["n"]), int(d["m"]), int(d["q"])
        raw = d["values"]
        if raw and isinstance(raw[0], list):
            rows = [[parse_rational(v) for v in row] for row in raw]
        else:
            flat = [parse_rational(v) for v in raw]
            if len(flat) % m:
                raise ValueError("flat value array length is not a multiple of m")
            rows = [flat[i: i + m] for i in range(0, len(flat), m)]
        return cls(n, m, q, rows, d.get("name", ""))

    @classmethod
    def load(cls, path) -> "GridMap":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def eval_map(f: GridMap, x: Sequence) -> tuple[Fraction, ...]:
    """Multilinear interpolant at ``x``, exact."""
    x = [Fraction(v) for v in x]
    if len(x) != f.n:
        raise ValueError(f"point has dimension {len(x)}, map expects {f.n}")
    if any(v < 0 or v > 1 for v in x):
        raise ValueError("point outside the unit cube")
    c = 1 << f.q
    base, frac = [], []
    for v in x:
        i = min(math.floor(v * c), c - 1)
        base.append(i)
        frac.append(v * c - i)
    out = [Fraction(0)] * f.m
    for corner in itertools.product((0, 1), repeat=f.n):
        w = Fraction(1)
        for o, t in zip(corner, frac):
            w *= t if o else 1 - t
        if w:
            val = f.node_value([b + o for b, o in zip(base, corner)])
            out = [acc + w * v for acc, v in zip(out, val)]
    return tuple(out)


@dataclass(frozen=True)
class FiberApprox:
    """Outer cell approximation of ``f^-1(t)`` plus the parts known to meet the fiber.

    ``cells`` is a boolean mask over grid cells. ``certified_cells`` marks
    cells that surely contain a fiber point; ``points`` lists exact fiber
    points (grid nodes and cell centres, in units of ``2^-(q+1)``).
    """

    t: tuple[Fraction, ...]
    q: int
    cells: np.ndarray
    certified_cells: np.ndarray
    points: tuple[tuple[int, ...], ...]
    outer: bool = True

    @property
    def n(self) -> int:
        return self.cells.ndim

    def cell_list(self) -> list[tuple[int, ...]]:
        return [tuple(int(i) for i in ix) for ix in np.argwhere(self.cells)]

    @property
    def empty(self) -> bool:
        return not self.cells.any()


def fiber_cells(f: GridMap, t: Sequence) -> FiberApprox:
    t = tuple(Fraction(v) for v in t)
    if len(t) != f.m:
        raise ValueError(f"target has dimension {len(t)}, map has {f.m}")
    scaled = [v * f.den for v in t]
    mask = np.ones(f.cell_min.shape[:-1], dtype=bool)
    for k, s in enumerate(scaled):
        num, den = s.numerator, s.denominator
        mask &= (f.cell_min[..., k] * den <= num) & (f.cell_max[..., k] * den >= num)
    # a scalar map is continuous on a connected cell, so its range there is an interval
    certified = mask.copy() if f.m == 1 else np.zeros_like(mask)
    points = []
    if all(s.denominator == 1 for s in scaled):
        target = np.array([int(s) for s in scaled], dtype=f.nums.dtype)
        node_hit = (f.nums == target).all(axis=-1)
        points.extend(tuple(int(2 * i) for i in ix) for ix in np.argwhere(node_hit))
    corner_count = 1 << f.n
    csum_target = [s * corner_count for s in scaled]
    if all(s.denominator == 1 for s in csum_target):
        target = np.array([int(s) for s in csum_target], dtype=f.center_sum.dtype)
        centre_hit = (f.center_sum == target).all(axis=-1)
        points.extend(tuple(int(2 * i + 1) for i in ix) for ix in np.argwhere(centre_hit))
    return FiberApprox(t, f.q, mask, certified, tuple(sorted(points)))


def _dilate_axis(arr: np.ndarray, axis: int, lo_off: int, hi_off: int, out_len: int) -> np.ndarray:
    """``out[i] = any(arr[j])`` over ``i - hi_off <= j <= i - lo_off``."""
    arr = np.moveaxis(arr, axis, 0)
    L = arr.shape[0]
    cs = np.concatenate([np.zeros((1,) + arr.shape[1:], dtype=np.int64), np.cumsum(arr, axis=0, dtype=np.int64)])
    i = np.arange(out_len)
    start = np.clip(i - hi_off, 0, L)
    stop = np.clip(i - lo_off + 1, 0, L)
    stop = np.maximum(stop, start)
    out = (cs[stop] - cs[start]) > 0
    return np.moveaxis(out, 0, axis)


def _refine(mask: np.ndarray, factor: int) -> np.ndarray:
    for ax in range(mask.ndim):
        mask = np.repeat(mask, factor, axis=ax)
    return mask


def _dilate_cells(mask: np.ndarray, rho: int) -> np.ndarray:
    for ax in range(mask.ndim):
        mask = _dilate_axis(mask, ax, -rho, rho, mask.shape[ax])
    return mask


def _dilate_vertices(vmask: np.ndarray, rho: int, cells: int) -> np.ndarray:
    """Cells covered by the boxes ``[v - rho, v + rho]`` around marked vertices."""
    for ax in range(vmask.ndim):
        vmask = _dilate_axis(vmask, ax, -rho, rho - 1, cells)
    return vmask


def _units(x: Fraction, R: int) -> int:
    v = Fraction(x) * (1 << R)
    if v.denominator != 1:
        raise ValueError(f"{x} is not a multiple of 2^-{R}")
    return int(v)


def _fraction_of(mask: np.ndarray, R: int) -> Fraction:
    return Fraction(int(mask.sum()), 1 << (R * mask.ndim))


def measure_upper(fa: FiberApprox, r) -> Fraction:
    """Measure of ``(union of fiber cells) +_inf r`` inside the cube."""
    r = Dyadic(r)
    if fa.empty:
        return Fraction(0)
    R = max(fa.q, r.q)
    fine = _refine(fa.cells, 1 << (R - fa.q))
    return _fraction_of(_dilate_cells(fine, _units(r, R)), R)


def measure_lower(fa: FiberApprox, r) -> Fraction:
    """Measure of a set surely inside ``f^-1(t) +_inf r``.

    Exact fiber points contribute their ``r``-boxes; a certified cell of
    side ``h`` contributes the box of half-width ``r - h/2`` about its
    centre, which lies within ``r`` of whichever fiber point the cell holds.
    """
    r = Dyadic(r)
    R = max(fa.q + 1, r.q)
    cells = 1 << R
    n = fa.n
    scale = 1 << (R - fa.q - 1)
    total = np.zeros((cells,) * n, dtype=bool)
    if fa.points:
        v = np.zeros((cells + 1,) * n, dtype=bool)
        for p in fa.points:
            v[tuple(c * scale for c in p)] = True
        total |= _dilate_vertices(v, _units(r, R), cells)
    h = Fraction(1, 1 << fa.q)
    if fa.certified_cells.any() and r >= h / 2:
        v = np.zeros((cells + 1,) * n, dtype=bool)
        idx = np.argwhere(fa.certified_cells)
        v[tuple((2 * idx[:, k] + 1) * scale for k in range(n))] = True
        total |= _dilate_vertices(v, _units(r - h / 2, R), cells)
    return _fraction_of(total, R)


def neighborhood_measure(fa: FiberApprox, r) -> BoundedValue:
    """Enclosure of the Lebesgue measure of ``f^-1(t) +_inf r`` within the cube."""
    r = Fraction(r)
    if not 0 < r < Fraction(1, 2):
        raise ValueError("r must lie in (0, 1/2)")
    return BoundedValue(measure_lower(fa, r), measure_upper(fa, r))


# -- waist checks ----------------------------------------------------------


def t_candidates(f: GridMap) -> list[tuple[Fraction, ...]]:
    """Node values, cell-centre values and the image-space grid at spacing ``2^-q``."""
    seen: set[tuple[Fraction, ...]] = set()
    flat = f.nums.reshape(-1, f.m)
    for row in {tuple(int(v) for v in r) for r in flat}:
        seen.add(tuple(Fraction(v, f.den) for v in row))
    cden = f.den << f.n
    for row in {tuple(int(v) for v in r) for r in f.center_sum.reshape(-1, f.m)}:
        seen.add(tuple(Fraction(v, cden) for v in row))
    c = 1 << f.q
    axes = []
    for k in range(f.m):
        lo = Fraction(int(flat[:, k].min()), f.den)
        hi = Fraction(int(flat[:, k].max()), f.den)
        axes.append([Fraction(j, c) for j in range(math.floor(lo * c), math.ceil(hi * c) + 1)])
    seen.update(itertools.product(*axes))
    return sorted(seen)


@dataclass
class WaistReport:
    kind: str
    map_name: str
    n: int
    m: int
    q: int
    t: tuple[Fraction, ...] | None
    per_r: list[dict] = field(default_factory=list)
    passed: bool = True
    certified: bool = False

    @property
    def status(self) -> str:
        if self.passed:
            return "PASS"
        return "FAIL (grid-resolution refutation candidate)"

    def to_json(self) -> dict:
        return {
            "check": self.kind,
            "map": self.map_name,
            "n": self.n,
            "m": self.m,
            "q": self.q,
            "t": None if self.t is None else [format_rational(v) for v in self.t],
            "status": self.status,
            "certified": self.certified,
            "per_r": self.per_r,
        }


def _measure_bound(r: Fraction, m: int) -> Fraction:
    return (r / 2) ** m


def best_t(f: GridMap, rs: Sequence) -> tuple[tuple[Fraction, ...], Fraction]:
    """Candidate maximizing ``min_r mu_upper / (r/2)^m``; ties go to the smallest ``t``."""
    rs = [Fraction(r) for r in rs]
    best, best_ratio = None, None
    for t in t_candidates(f):
        fa = fiber_cells(f, t)
        if fa.empty:
            continue
        ratio = min(measure_upper(fa, r) / _measure_bound(r, f.m) for r in rs)
        if best_ratio is None or ratio > best_ratio:
            best, best_ratio = t, ratio
    if best is None:
        raise ValueError("no candidate value has a non-empty fiber")
    return best, best_ratio


def waist_check_measure(f: GridMap, rs: Iterable, t=None) -> WaistReport:
    """Search ``t`` for ``mu(f^-1(t) +_inf r) >= (r/2)^m`` at every ``r``."""
    rs = [Fraction(r) for r in rs]
    for r in rs:
        if not 0 < r < Fraction(1, 2):
            raise ValueError("every r must lie in (0, 1/2)")
    if t is None:
        t, _ = best_t(f, rs)
    fa = fiber_cells(f, t)
    rep = WaistReport("measure", f.name, f.n, f.m, f.q, tuple(t))
    certified = True
    for r in rs:
        mu = neighborhood_measure(fa, r)
        bound = _measure_bound(r, f.m)
        ok = mu.hi >= bound
        cert = mu.lo >= bound
        rep.per_r.append({
            "r": format_rational(r),
            "bound": format_rational(bound),
            "measure_lo": format_rational(mu.lo),
            "measure_hi": format_rational(mu.hi),
            "ratio_hi": format_rational(mu.hi / bound),
            "status": "PASS" if ok else "FAIL (grid-resolution refutation candidate)",
            "certified": cert,
        })
        rep.passed &= ok
        certified &= cert
    rep.certified = certified and rep.passed
    return rep


def _certified_boxes(fa: FiberApprox) -> np.ndarray:
    """Exact points first, then certified cells, as integer boxes ``(K, n, 2)`` in units ``2^-(q+1)``."""
    pts = np.array(fa.points, dtype=np.int64).reshape(-1, fa.n)
    parts = [np.stack([pts, pts], axis=-1)]
    idx = np.argwhere(fa.certified_cells).astype(np.int64)
    if len(idx):
        parts.append(np.stack([2 * idx, 2 * idx + 2], axis=-1))
    return np.concatenate(parts) if parts else np.zeros((0, fa.n, 2), dtype=np.int64)


def separated_fiber_count(fa: FiberApprox, r) -> int:
    """Greedy ``r``-separated family of fiber points drawn from distinct certified boxes.

    Boxes are scanned in order and kept when their sup-norm gap to every
    kept box is at least ``r``; each kept box holds a fiber point.
    """
    r = Fraction(r) * (1 << (fa.q + 1))
    boxes = _certified_boxes(fa)
    alive = np.ones(len(boxes), dtype=bool)
    count = 0
    while alive.any():
        i = int(np.argmax(alive))
        count += 1
        b = boxes[i]
        gap = np.maximum(np.maximum(boxes[:, :, 0] - b[:, 1], b[:, 0] - boxes[:, :, 1]), 0).max(axis=1)
        # gap >= r  <=>  gap * den >= num
        alive &= gap * r.denominator >= r.numerator
    return count


def waist_check_cover(f: GridMap, rs: Iterable, t=None) -> WaistReport:
    """Check ``#(f^-1(t), l_inf, r) >= 8^-n (1/r)^(n-m)`` at the measure-optimal ``t``."""
    rs = [Fraction(r) for r in rs]
    if t is None:
        t, _ = best_t(f, rs)
    fa = fiber_cells(f, t)
    rep = WaistReport("cover", f.name, f.n, f.m, f.q, tuple(t))
    for r in rs:
        count = separated_fiber_count(fa, r)
        bound = Fraction(1, 8 ** f.n) * (1 / r) ** (f.n - f.m)
        ok = count >= bound
        rep.per_r.append({
            "r": format_rational(r),
            "bound": format_rational(bound),
            "separated_lower": count,
            "status": "PASS" if ok else "FAIL (grid-resolution refutation candidate)",
        })
        rep.passed &= ok
    rep.certified = rep.passed
    return rep
