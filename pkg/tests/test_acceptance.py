"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import random
import time
from fractions import Fraction
from pathlib import Path

from condmdim.blocks import BlockSet, block_cover_upper, lemma51_bound
from condmdim.cli import main
from condmdim.construction import (
    build_construction,
    check_invariants,
    random_point,
    syndetic_check,
    verify_density,
    verify_expansivity,
    window_isometry,
)
from condmdim.corpus import corpus
from condmdim.covering import (
    FiniteMetricSpace,
    cover_number_exact,
    cover_number_greedy,
    separated_lower_bound,
    verify_certificate,
)
from condmdim.estimators import check_profile_subadditivity, conditional_profile
from condmdim.factors import ProjectionFactor, fiber_cover_bracket
from condmdim.geometry import DyadicVec
from condmdim.waist import best_t, waist_check_cover, waist_check_measure

from oracles import exhaustive_cover

ROOT = Path(__file__).resolve().parents[1]


def _random_metric(rng, n):
    """Either sup-norm points on a dyadic grid or a shortest-path metric on a random weighted graph."""
    if rng.random() < 0.5:
        dim = rng.randint(1, 3)
        pts = sorted({tuple(Fraction(rng.randint(0, 8), 8) for _ in range(dim)) for _ in range(n)})
        table = [[max(abs(a - b) for a, b in zip(u, v)) for v in pts] for u in pts]
        return table
    w = [[Fraction(0) if i == j else Fraction(rng.randint(1, 8), 8) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            w[i][j] = w[j][i]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                w[i][j] = min(w[i][j], w[i][k] + w[k][j])
    return w


def test_criterion_1_covering_oracle(acceptance_log):
    start = time.perf_counter()
    rng = random.Random(2024)
    agree = 0
    for _ in range(60):
        table = _random_metric(rng, rng.randint(1, 9))
        n = len(table)
        eps = Fraction(rng.randint(1, 8), 8)
        space = FiniteMetricSpace.from_table(list(range(n)), table)
        res = cover_number_exact(space, eps)
        verify_certificate(space, eps, res)
        agree += res.upper == res.lower == exhaustive_cover(n, lambda i, j: table[i][j], eps)
    sandwich = 0
    for _ in range(250):
        table = _random_metric(rng, rng.randint(1, 16))
        eps = Fraction(rng.randint(1, 8), 8)
        space = FiniteMetricSpace.from_table(list(range(len(table))), table)
        sep = separated_lower_bound(space, eps)
        ex = cover_number_exact(space, eps)
        gr = cover_number_greedy(space, eps)
        sandwich += sep.lower <= ex.lower == ex.upper <= gr.upper
    elapsed = time.perf_counter() - start
    ok = agree == 60 and sandwich == 250 and elapsed < 60
    acceptance_log("1", ok, f"oracle {agree}/60, sandwich {sandwich}/250, {elapsed:.1f}s")
    assert ok


def test_criterion_2_waist_corpus(acceptance_log):
    start = time.perf_counter()
    rs = [Fraction(1, 8), Fraction(1, 4), Fraction(3, 8)]
    failures = []
    for q in (4, 5):
        for f in corpus(q):
            t, _ = best_t(f, rs)
            for rep in (waist_check_measure(f, rs, t=t), waist_check_cover(f, rs, t=t)):
                if not rep.passed:
                    failures.append((q, f.name, rep.kind))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300
    acceptance_log("2", ok, f"{len(corpus(4))} maps at q=4,5, failures {failures}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_sharpness_slopes(acceptance_log):
    start = time.perf_counter()
    problems = []
    for a, b in ((2, 1), (3, 1), (3, 2)):
        p = ProjectionFactor(a, b)
        for k in range(1, 9):
            for N in (1, 2, 8, 8 * k):
                if not fiber_cover_bracket(p, N, Fraction(1, 2 ** k)).lower_at_least(a - b):
                    problems.append(("lower", a, b, k, N))
        diag = [fiber_cover_bracket(p, 8 * k, Fraction(1, 2 ** k)) for k in (4, 6, 8)]
        if not all(later.upper_below(earlier) for earlier, later in zip(diag, diag[1:])):
            problems.append(("decreasing", a, b))
        if not diag[-1].upper_at_most(Fraction(11, 5) * (a - b)):
            problems.append(("cap", a, b, diag[-1].upper))
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 60
    acceptance_log("3", ok, f"problems {problems}, {elapsed:.2f}s")
    assert ok


def test_criterion_4_subadditivity(acceptance_log):
    violations = []
    for eps in (Fraction(1, 4), Fraction(1, 8)):
        for delta in (Fraction(1, 8), Fraction(1, 16)):
            table = conditional_profile(ProjectionFactor(2, 1), delta, range(1, 17), [eps])
            violations += check_profile_subadditivity(table, eps, max_total=16)
            rows = {r.N: r for r in table.for_eps(eps)}
            # the bracket ends themselves are submultiplicative in N
            for n1 in rows:
                for n2 in rows:
                    if n1 <= n2 and n1 + n2 in rows:
                        for end in ("lower", "upper"):
                            lhs = getattr(rows[n1 + n2], end)
                            rhs = getattr(rows[n1], end) * getattr(rows[n2], end)
                            if lhs > rhs:
                                violations.append((end, n1, n2))
    ok = not violations
    acceptance_log("4", ok, f"{len(violations)} violations over N1+N2 <= 16")
    assert ok


def test_criterion_5_block_bound(acceptance_log):
    anchor = lemma51_bound(3, 2, 10, Fraction(1, 2))
    rng = random.Random(55)
    dominated = 0
    for i in range(20):
        a, N = rng.randint(1, 2), rng.randint(1, 3)
        blocks = [
            [[Fraction(rng.randint(0, 4), 4) for _ in range(a)] for _ in range(N)]
            for _ in range(rng.randint(1, 4))
        ]
        K = BlockSet.explicit(blocks, a=a)
        rep = block_cover_upper(K, rng.randint(1, 8), rng.choice([Fraction(1, 2), Fraction(1, 4)]), seed=i)
        dominated += bool(rep.dominated)
    ok = anchor == 118098 and dominated == 20
    acceptance_log("5", ok, f"bound {anchor}, direct <= formula on {dominated}/20")
    assert ok


def test_criterion_6_construction(acceptance_log):
    start = time.perf_counter()
    reports = []
    for a, s in ((1, Fraction(1, 2)), (2, Fraction(1))):
        c = build_construction(a, s, 2)
        reports.append(check_invariants(c))
        for lv in c.levels[:-1]:
            d = verify_density(lv, lv.net, lv.waypoints)
            reports.append({"invariant": "density", "status": "PASS" if d["ok"] else "FAIL"})
        for lv in c.levels:
            reports.append(verify_expansivity(c, lv.n, q=3))
        syn = syndetic_check(c, 1)
        reports.append(syn)
    elapsed = time.perf_counter() - start
    bad = [r for r in reports if r["status"] != "PASS"]
    pairs = [r["pairs"] for r in reports if r["invariant"] == "expansivity"]
    ok = not bad and elapsed < 300
    acceptance_log("6", ok, f"{len(reports)} checks, expansivity pairs {pairs}, {elapsed:.1f}s")
    assert ok


def test_criterion_7_window_isometry(acceptance_log):
    rng = random.Random(7)
    mismatches = 0
    checked = 0
    for a, s in ((1, Fraction(1, 2)), (2, Fraction(1))):
        c = build_construction(a, s, 2)
        for lv in c.levels:
            pairs = [(random_point(c, lv.n, rng), random_point(c, lv.n, rng)) for _ in range(1000)]
            mismatches += len(window_isometry(c, lv.n, pairs))
            checked += len(pairs)
    ok = mismatches == 0 and checked == 4000
    acceptance_log("7", ok, f"{checked} pairs, {mismatches} mismatches")
    assert ok


CLI_RUNS = [
    ["cover", "--grid-q", "2", "--dim", "2", "--eps", "1/2", "--certificates"],
    ["profile", "--a", "1", "--q", "3", "--eps", "1/2,1/4", "--N", "1,2,3"],
    ["profile", "--a", "1", "--q", "3", "--eps", "1/2,1/4", "--N", "1,2,3", "--format", "csv"],
    ["conditional", "--a", "2", "--b", "1", "--delta", "1/8", "--eps", "1/4", "--N", "1,2,4"],
    ["conditional", "--a", "3", "--b", "1", "--bracket", "--eps", "1/16,1/64", "--N", "32,48"],
    ["waist", "--map", str(ROOT / "corpus" / "saddle.json")],
    ["block", "--cover-count", "3", "--block-length", "2", "--L", "10", "--eps", "1/2"],
    ["construct", "--a", "2", "--s", "1", "--depth", "2"],
    ["verify", "--suite", "covering", "--instances", "30", "--seed", "3"],
    ["verify", "--suite", "construction", "--pairs", "50"],
]


def test_criterion_8_cli_determinism(acceptance_log, tmp_path):
    differing = []
    codes = []
    for i, argv in enumerate(CLI_RUNS):
        outs = []
        for rep in range(2):
            path = tmp_path / f"run{i}_{rep}"
            codes.append(main(argv + ["--output", str(path)]))
            outs.append(path.read_bytes())
        if outs[0] != outs[1] or not outs[0]:
            differing.append(argv[0])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "construct", "a": 1, "s": "1/2", "depth": 3}))
    outs = []
    for rep in range(2):
        path = tmp_path / f"cfg_{rep}"
        codes.append(main(["--config", str(cfg), "--output", str(path)]))
        outs.append(path.read_bytes())
    if outs[0] != outs[1]:
        differing.append("config")
    ok = not differing and all(c == 0 for c in codes)
    acceptance_log("8", ok, f"{len(CLI_RUNS) + 1} configurations run twice, differing {differing}")
    assert ok


def test_acceptance_inputs_are_dyadic():
    # guard against silently testing with non-dyadic symbols
    assert DyadicVec([Fraction(1, 4)]).q == 2
