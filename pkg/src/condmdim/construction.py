"""Inductive construction of block sets ``K_1, K_2, ...`` inside the full shift.

``K_1`` is the cube ``[0,1]^a`` (one free slot). Level ``n + 1`` concatenates
``p_n - q_n`` free copies of ``K_n`` and then ``q_n`` fixed waypoint blocks.
The waypoints walk an Eulerian circuit through every ordered pair of a
``1/n``-net of ``K_n``, so each level-``(n+1)`` block carries a close copy of
every pair of level-``n`` patterns.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .blocks import BlockSet
from .geometry import Dyadic, DyadicVec, enumerate_grid, QGrid, format_rational, linf_dist
from .shift import PERIODIC, LatticeWord, paired_distance_bounds, window

NET_CAP = 4096
PAIR_CAP = 10_000

Block = tuple[DyadicVec, ...]


def axis_net(n: int) -> tuple[Dyadic, ...]:
    """Centres ``(2i+1)/(2k)`` with ``k`` the least power of two above ``n/2``.

    Every point of ``[0,1]`` is within ``1/(2k) < 1/n`` of a centre, and the
    centres stay dyadic.
    """
    if n < 1:
        raise ValueError("level index must be >= 1")
    k = 1
    while 2 * k <= n:
        k *= 2
    return tuple(Dyadic(2 * i + 1, 2 * k) for i in range(k))


def axis_net_radius(centres: Sequence[Fraction]) -> Fraction:
    """Largest distance from a point of ``[0,1]`` to the nearest centre (exact)."""
    cs = sorted(Fraction(c) for c in centres)
    gaps = [cs[0], 1 - cs[-1]] + [(v - u) / 2 for u, v in zip(cs, cs[1:])]
    return max(gaps)


def eulerian_circuit(nu: int) -> list[int]:
    """Hierholzer on the complete digraph with loops over ``nu`` nodes, from node 0.

    Visits all ``nu**2`` ordered pairs as consecutive entries of a sequence
    of length ``nu**2 + 1``.
    """
    if nu < 1:
        raise ValueError("need at least one node")
    next_out = [0] * nu
    stack, circuit = [0], []
    while stack:
        v = stack[-1]
        if next_out[v] < nu:
            u = next_out[v]
            next_out[v] += 1
            stack.append(u)
        else:
            circuit.append(stack.pop())
    circuit.reverse()
    return circuit


@dataclass
class Level:
    n: int
    N: int
    M: int
    K: BlockSet
    default: Block
    free: tuple[int, ...]
    net: tuple[Block, ...] | None = None
    waypoints: tuple[Block, ...] | None = None
    p: int | None = None
    q: int | None = None

    @property
    def r(self) -> Fraction | None:
        return None if self.p is None else Fraction(self.q, self.p)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "N_n": self.N,
            "M_n": self.M,
            "p_n": self.p,
            "q_n": self.q,
            "r_n": None if self.r is None else format_rational(self.r),
            "waypoints": None if self.waypoints is None
            else [[s.to_json() for s in b] for b in self.waypoints],
        }


@dataclass
class Construction:
    a: int
    s_target: Fraction
    levels: list[Level] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def achieved_ratio(self) -> Fraction:
        top = self.levels[-1]
        return Fraction(self.a * top.M, top.N)

    def level(self, n: int) -> Level:
        if not 1 <= n <= self.depth:
            raise IndexError(f"level {n} outside 1..{self.depth}")
        return self.levels[n - 1]

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "s_target": format_rational(self.s_target),
            "depth": self.depth,
            "achieved_ratio": format_rational(self.achieved_ratio),
            "levels": [lv.to_json() for lv in self.levels],
        }


def first_level(a: int) -> Level:
    zero = DyadicVec.zeros(a)
    return Level(1, 1, 1, BlockSet.cube(a, 1), (zero,), (0,))


def fill_block(level: Level, x: Sequence[DyadicVec]) -> Block:
    """The ``K_n`` block whose free slots carry ``x`` (in slot order)."""
    if len(x) != level.M:
        raise ValueError(f"expected {level.M} free symbols, got {len(x)}")
    out = list(level.default)
    for slot, sym in zip(level.free, x):
        out[slot] = DyadicVec(sym)
    return tuple(out)


def net_blocks(level: Level, cap: int = NET_CAP) -> tuple[Block, ...]:
    """Product of the axis net over every free coordinate of ``K_n``."""
    centres = axis_net(level.n)
    a = level.K.a
    size = len(centres) ** (a * level.M)
    if size > cap:
        raise ValueError(f"net of {size} blocks exceeds the cap {cap}")
    syms = [DyadicVec(v) for v in itertools.product(centres, repeat=a)]
    return tuple(fill_block(level, x) for x in itertools.product(syms, repeat=level.M))


def build_waypoints(level: Level, cap: int = NET_CAP) -> tuple[tuple[Block, ...], tuple[Block, ...]]:
    """Net of ``K_n`` and a waypoint sequence whose consecutive pairs hit every net pair.

    Returns ``(net, waypoints)``; density is verified before returning.
    """
    net = net_blocks(level, cap)
    order = eulerian_circuit(len(net))
    waypoints = tuple(net[i] for i in order)
    report = verify_density(level, net, waypoints)
    if not report["ok"]:
        raise AssertionError(f"waypoint density failed: {report}")
    return net, waypoints


def verify_density(level: Level, net: Sequence[Block], waypoints: Sequence[Block]) -> dict:
    """Every ordered net pair is consecutive somewhere, and the net radius is below ``1/n``."""
    index = {b: i for i, b in enumerate(net)}
    seen = {(index[u], index[v]) for u, v in zip(waypoints, waypoints[1:])}
    missing = len(net) ** 2 - len(seen)
    radius = axis_net_radius(axis_net(level.n))
    return {
        "ok": missing == 0 and radius < Fraction(1, level.n),
        "net_size": len(net),
        "missing_pairs": missing,
        "radius": format_rational(radius),
        "tolerance": format_rational(Fraction(1, level.n)),
    }


def pair_error(u: Block, v: Block, waypoints: Sequence[Block]) -> Fraction:
    """``min_k ||(u, v) - (w_k, w_{k+1})||_inf``."""
    best = None
    for w1, w2 in zip(waypoints, waypoints[1:]):
        d = max(max(Fraction(linf_dist(s, t)) for s, t in zip(u, w1)),
                max(Fraction(linf_dist(s, t)) for s, t in zip(v, w2)))
        if best is None or d < best:
            best = d
    return best


def _next_level(prev: Level, p: int) -> Level:
    q = len(prev.waypoints)
    N = p * prev.N
    M = (p - q) * prev.M
    slots = list(prev.K.slots) * (p - q)
    for w in prev.waypoints:
        slots.extend(tuple((c, c) for c in sym) for sym in w)
    free = tuple(j * prev.N + s for j in range(p - q) for s in prev.free)
    default = tuple(s for _ in range(p - q) for s in prev.default) + tuple(s for w in prev.waypoints for s in w)
    return Level(prev.n + 1, N, M, BlockSet.box(slots), default, free)


def build_level(prev: Level, r_target, n: int | None = None) -> tuple[Level, Level]:
    """Choose ``p_n`` for ``prev`` and derive level ``n + 1``.

    ``q_n`` is the waypoint count; ``p_n`` is the least integer above ``q_n``
    with ``q_n / p_n <= r_target``. Returns the completed ``prev`` and the new level.
    """
    r_target = Fraction(r_target)
    if not 0 < r_target <= 1:
        raise ValueError("r_target must lie in (0, 1]")
    if n is not None and n != prev.n:
        raise ValueError(f"level index mismatch: {n} vs {prev.n}")
    if prev.waypoints is None:
        prev.net, prev.waypoints = build_waypoints(prev)
    q = len(prev.waypoints)
    p = max(q + 1, math.ceil(q / r_target))
    prev.p, prev.q = p, q
    return prev, _next_level(prev, p)


def _root_up(rho: Fraction, k: int) -> Fraction:
    """A rational ``u < 1`` with ``u^k >= rho`` and ``u`` close to ``rho^(1/k)``."""
    if k == 1:
        return rho
    u = Fraction(float(rho) ** (1 / k)).limit_denominator(10_000)
    step = Fraction(1, 10_000)
    while u ** k < rho:
        u += step
    return min(u, 1 - step)


def build_construction(a: int, s_target, depth: int) -> Construction:
    """Levels ``1..depth`` aiming at ``a * M_n / N_n`` close to ``s_target`` from above."""
    s_target = Fraction(s_target)
    if not 0 <= s_target < a:
        raise ValueError("s_target must lie in [0, a)")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    c = Construction(a, s_target, [first_level(a)])
    for remaining in range(depth - 1, 0, -1):
        cur = c.levels[-1]
        rho = s_target / Fraction(a * cur.M, cur.N)
        r_target = 1 - _root_up(rho, remaining) if rho > 0 else Fraction(1)
        _, nxt = build_level(cur, r_target)
        c.levels.append(nxt)
    return c


# -- embeddings ------------------------------------------------------------


def _lift(c: Construction, n: int, block: Block, depth: int) -> Block:
    """Place ``block`` as the first level-``n`` sub-block of a level-``depth`` block."""
    out = block
    for lv in c.levels[n - 1: depth - 1]:
        fill = lv.p - lv.q - 1
        out = out + lv.default * fill + tuple(s for w in lv.waypoints for s in w)
    return out


def psi_n(c: Construction, n: int, x: Sequence[DyadicVec], depth: int | None = None) -> LatticeWord:
    """Periodic word carrying ``x`` in the free slots of ``[0, N_n - 1]``.

    The stored window is ``[-N_D, 2 N_D - 1]`` holding ``(delta_D, B_D, delta_D)``
    with ``B_D`` the lifted block; its period ``3 N_D`` is a multiple of ``N_D``.
    """
    depth = c.depth if depth is None else depth
    if not 1 <= n <= depth <= c.depth:
        raise IndexError(f"need 1 <= n={n} <= depth={depth} <= {c.depth}")
    lv = c.level(n)
    top = c.level(depth)
    B = _lift(c, n, fill_block(lv, x), depth)
    syms = top.default + B + top.default
    return LatticeWord(c.a, -top.N, 2 * top.N - 1, syms, PERIODIC)


def free_points(c: Construction, n: int, q: int, cap: int = 1_000_000) -> list[tuple[DyadicVec, ...]]:
    """All quantized points of ``([0,1]^a)^{M_n}`` at resolution ``q``."""
    lv = c.level(n)
    syms = list(enumerate_grid(QGrid(c.a, q)))
    total = len(syms) ** lv.M
    if total > cap:
        raise ValueError(f"{total} points exceed the cap {cap}")
    return list(itertools.product(syms, repeat=lv.M))


def point_dist(x: Sequence[DyadicVec], y: Sequence[DyadicVec]) -> Fraction:
    return max((Fraction(linf_dist(u, v)) for u, v in zip(x, y)), default=Fraction(0))


def quantized_pairs(c: Construction, n: int, q: int = 3, limit: int = PAIR_CAP, seed: int = 0):
    """Every unordered pair of quantized points when there are at most ``limit``; otherwise a seeded sample."""
    pts = free_points(c, n, q)
    total = len(pts) * (len(pts) + 1) // 2
    if total <= limit:
        return [(pts[i], pts[j]) for i in range(len(pts)) for j in range(i, len(pts))], True
    rng = random.Random(seed)
    return [(pts[rng.randrange(len(pts))], pts[rng.randrange(len(pts))]) for _ in range(limit)], False


def verify_expansivity(c: Construction, n: int, pairs=None, q: int = 3, seed: int = 0, m: int | None = None) -> dict:
    """Check ``||x - y|| <= d_{N_n}(psi x, psi y).lo`` on the given or quantized pairs."""
    exhaustive = None
    if pairs is None:
        pairs, exhaustive = quantized_pairs(c, n, q, seed=seed)
    lv = c.level(n)
    m = lv.N if m is None else m
    violations = []
    batch = 2000
    for start in range(0, len(pairs), batch):
        chunk = pairs[start: start + batch]
        xs = [psi_n(c, n, x) for x, _ in chunk]
        ys = [psi_n(c, n, y) for _, y in chunk]
        lo, _, scale = paired_distance_bounds(xs, ys, lv.N, m)
        for (x, y), v in zip(chunk, lo):
            d = point_dist(x, y)
            if d * scale > int(v):
                violations.append({
                    "x": [s.to_json() for s in x],
                    "y": [s.to_json() for s in y],
                    "norm": format_rational(d),
                    "dN_lo": format_rational(Fraction(int(v), scale)),
                })
    return {
        "invariant": "expansivity",
        "level": n,
        "status": "PASS" if not violations else "FAIL",
        "pairs": len(pairs),
        "exhaustive": exhaustive,
        "violations": violations[:5],
    }


def window_isometry(c: Construction, n: int, pairs) -> list:
    """Pairs where the ``[0, N_n - 1]`` window distance differs from ``||x - y||``."""
    lv = c.level(n)
    bad = []
    for x, y in pairs:
        wx = window(psi_n(c, n, x), 0, lv.N - 1)
        wy = window(psi_n(c, n, y), 0, lv.N - 1)
        wd = max(Fraction(linf_dist(u, v)) for u, v in zip(wx, wy))
        if wd != point_dist(x, y):
            bad.append((x, y, wd))
    return bad


def random_point(c: Construction, n: int, rng: random.Random, q: int = 6) -> tuple[DyadicVec, ...]:
    lv = c.level(n)
    side = 1 << q
    return tuple(DyadicVec(Dyadic(rng.randint(0, side), side) for _ in range(c.a)) for _ in range(lv.M))


# -- bookkeeping and recurrence --------------------------------------------


def check_invariants(c: Construction) -> dict:
    """Exact bookkeeping relations across consecutive levels."""
    failures = []
    prod = Fraction(1)
    for lv, nxt in zip(c.levels, c.levels[1:]):
        if nxt.N != lv.p * lv.N:
            failures.append(f"N_{nxt.n} != p_{lv.n} N_{lv.n}")
        if nxt.M != (lv.p - lv.q) * lv.M:
            failures.append(f"M_{nxt.n} != (p_{lv.n} - q_{lv.n}) M_{lv.n}")
        if not lv.p > lv.q >= 2:
            failures.append(f"need p_{lv.n} > q_{lv.n} >= 2")
        prod *= 1 - lv.r
        if Fraction(c.a * nxt.M, nxt.N) != c.a * prod:
            failures.append(f"ratio at level {nxt.n} differs from the product of (1 - r_k)")
        if nxt.K.free_slots() != list(nxt.free) or len(nxt.free) != nxt.M:
            failures.append(f"free slot bookkeeping at level {nxt.n}")
        if not nxt.K.contains(nxt.default):
            failures.append(f"default block of level {nxt.n} outside K")
    ratios = [Fraction(c.a * lv.M, lv.N) for lv in c.levels]
    if any(u < v for u, v in zip(ratios, ratios[1:])):
        failures.append("ratio increases with depth")
    if c.achieved_ratio < c.s_target:
        failures.append("achieved ratio below target")
    return {
        "invariant": "bookkeeping",
        "status": "PASS" if not failures else "FAIL",
        "failures": failures,
        "ratios": [format_rational(r) for r in ratios],
    }


def syndetic_check(c: Construction, n: int, depth: int | None = None) -> dict:
    """Recurrence evidence for level-``n`` pattern pairs.

    Structural part: the last ``q_n`` slots of every level-``(n+1)`` block are
    the waypoints, whose consecutive pairs approximate each pair of ``K_n``
    to within the net radius. Scan part: in the periodic word ``psi_D(0)``,
    aligned windows of length ``2 N_n`` are matched to their nearest net
    pair; the largest cyclic gap between matches is reported.
    """
    depth = c.depth if depth is None else depth
    if depth < n + 1:
        raise ValueError("syndetic check needs depth >= n + 1")
    lv = c.level(n)
    nxt = c.level(n + 1)
    centres = axis_net(n)
    radius = axis_net_radius(centres)
    tol = Fraction(1, n)
    word = psi_n(c, depth, [DyadicVec.zeros(c.a)] * c.level(depth).M, depth)
    period = word.period
    Q = max(max(s.q for s in word.symbols), max(ct.q for ct in centres))
    syms = np.array([s.at(Q) for s in word.symbols], dtype=np.int64)  # (period, a)
    cen = np.array([ct.at(Q) for ct in centres], dtype=np.int64)
    fixed = [i for i in range(lv.N) if i not in set(lv.free)]
    fixed_vals = np.array([lv.default[i].at(Q) for i in fixed], dtype=np.int64).reshape(len(fixed), c.a)
    span = 2 * lv.N
    # aligned starts relative to the stored window; index 0 of the word is a block boundary
    starts = [s for s in range(0, period, lv.N)]
    occurrences: dict[tuple, list[int]] = {}
    worst_err = Fraction(0)
    for st in starts:
        idx = [(st + j) % period for j in range(span)]
        win = syms[idx]
        key, err_num = [], 0
        ok = True
        for half in (0, 1):
            part = win[half * lv.N: (half + 1) * lv.N]
            if fixed and not (part[fixed] == fixed_vals).all():
                ok = False
                break
            free_vals = part[list(lv.free)]  # (M, a)
            d = np.abs(free_vals[..., None] - cen[None, None, :])
            nearest = d.argmin(axis=-1)
            err_num = max(err_num, int(d.min(axis=-1).max()))
            key.append(tuple(nearest.ravel().tolist()))
        if not ok:
            continue
        err = Fraction(err_num, 1 << Q)
        if err >= tol:
            continue
        occurrences.setdefault(tuple(key), []).append(st)
        worst_err = max(worst_err, err)
    expected = len(centres) ** (2 * c.a * lv.M)
    worst_gap = 0
    for pos in occurrences.values():
        pos = sorted(pos)
        gaps = [v - u for u, v in zip(pos, pos[1:])] + [pos[0] + period - pos[-1]]
        worst_gap = max(worst_gap, max(gaps))
    complete = len(occurrences) == expected
    ok = complete and worst_gap <= 2 * nxt.N and radius < tol and worst_err < tol
    return {
        "invariant": "syndetic",
        "level": n,
        "status": "PASS" if ok else "FAIL",
        "pairs_expected": expected,
        "pairs_found": len(occurrences),
        "worst_gap": worst_gap,
        "gap_bound": 2 * nxt.N,
        "structural_error": format_rational(radius),
        "scan_error": format_rational(worst_err),
        "tolerance": format_rational(tol),
    }
