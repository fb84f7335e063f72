"""Command-line entry point.

Every subcommand writes one JSON (or CSV) document. Exit status is 0 on
success, 1 when a check fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .blocks import BlockSet, block_cover_upper, lemma51_bound
from .construction import (
    build_construction,
    check_invariants,
    random_point,
    syndetic_check,
    verify_density,
    verify_expansivity,
    window_isometry,
)
from .corpus import corpus
from .covering import (
    FiniteMetricSpace,
    cover_bounds,
    cover_number_greedy,
    separated_lower_bound,
    space_from_json,
    verify_certificate,
)
from .estimators import (
    BOWEN_D,
    WINDOW,
    FullShift,
    Singleton,
    check_profile_subadditivity,
    conditional_profile,
    profile_S,
    rate_estimate,
)
from .factors import ProjectionFactor, bracket_table, fiber_cover_bracket, identity_map
from .geometry import CapExceeded, Dyadic, QGrid, enumerate_grid, format_rational, linf_dist
from .waist import GridMap, best_t, waist_check_cover, waist_check_measure

OK, CHECK_FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, invariant: str, witness, payload: dict):
        super().__init__(invariant)
        self.invariant = invariant
        self.witness = witness
        self.payload = payload


def dyadic_arg(text: str) -> Dyadic:
    try:
        return Dyadic.parse(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a dyadic rational: {text!r}") from exc


def dyadic_list(text: str) -> list[Dyadic]:
    return [dyadic_arg(t) for t in str(text).split(",") if t.strip()]


def int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from exc


def rational_arg(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc


# -- commands --------------------------------------------------------------


def cmd_cover(args) -> dict:
    if args.space:
        space = space_from_json(json.loads(Path(args.space).read_text()))
    elif args.grid_q is not None:
        pts = list(enumerate_grid(QGrid(args.dim, args.grid_q)))
        space = FiniteMetricSpace.from_function(pts, linf_dist)
    else:
        raise UsageError("cover needs --space FILE or --grid-q Q")
    res = cover_bounds(space, args.eps, exact_cap=args.exact_cap)
    verify_certificate(space, args.eps, res)
    out = res.to_json(certificates=args.certificates)
    out.update({"eps": format_rational(args.eps), "points": len(space)})
    return out


def _profile_payload(table, epss, fmt):
    if fmt == "csv":
        return table.to_csv()
    out = table.to_json()
    rates = []
    for eps in epss:
        if len({r.N for r in table.for_eps(eps)}) >= 2:
            rates.append(rate_estimate(table, eps).to_json())
    out["rates"] = rates
    return out


def cmd_profile(args) -> dict | str:
    if args.system == "fullshift":
        system = FullShift(args.a, args.q, args.metric)
    elif args.system == "singleton":
        system = Singleton(args.a)
    else:
        raise UsageError(f"unknown system {args.system!r}")
    table = profile_S(system, args.N, args.eps)
    return _profile_payload(table, args.eps, args.format)


def cmd_conditional(args) -> dict | str:
    if args.map == "projection":
        fmap = ProjectionFactor(args.a, args.b, args.q)
    elif args.map == "identity":
        fmap = identity_map(args.a, args.q if args.q is not None else 2)
    else:
        raise UsageError(f"unknown map {args.map!r}")
    if args.bracket:
        if args.map != "projection":
            raise UsageError("--bracket applies to the projection map")
        brackets = [fiber_cover_bracket(fmap, N, eps, args.q) for N in args.N for eps in args.eps]
        table = bracket_table(fmap, brackets)
        if args.format == "csv":
            return table.to_csv()
        out = table.to_json()
        out["slopes"] = [
            {"N": b.N, "eps": format_rational(b.eps), "m": b.m,
             "lower": f"{b.lower:.12g}", "upper": f"{b.upper:.12g}",
             "lower_ge_a_minus_b": b.lower_at_least(fmap.a - fmap.b)}
            for b in brackets
        ]
        bad = [s for s in out["slopes"] if not s["lower_ge_a_minus_b"]]
        if bad:
            raise CheckFailed("slope-lower-bound", bad[0], out)
        return out
    table = conditional_profile(fmap, args.delta, args.N, args.eps)
    payload = _profile_payload(table, args.eps, args.format)
    violations = [v.to_json() | {"eps": format_rational(e)}
                  for e in args.eps for v in check_profile_subadditivity(table, e)]
    if isinstance(payload, dict):
        payload["subadditivity_violations"] = violations
    if violations:
        raise CheckFailed("subadditivity", violations[0], payload if isinstance(payload, dict) else {})
    return payload


def _load_map(args) -> GridMap:
    if args.map:
        return GridMap.load(args.map)
    for g in corpus(args.q):
        if g.name == args.corpus:
            return g
    raise UsageError(f"unknown corpus map {args.corpus!r}")


def cmd_waist(args) -> dict:
    if not args.map and not args.corpus:
        raise UsageError("waist needs --map FILE or --corpus NAME")
    f = _load_map(args)
    t, _ = best_t(f, args.r)
    rm = waist_check_measure(f, args.r, t=t)
    rc = waist_check_cover(f, args.r, t=t)
    out = {"measure": rm.to_json(), "cover": rc.to_json()}
    if not rm.passed:
        raise CheckFailed("waist-measure", {"t": out["measure"]["t"], "per_r": rm.per_r}, out)
    if not rc.passed:
        raise CheckFailed("waist-cover", {"t": out["cover"]["t"], "per_r": rc.per_r}, out)
    return out


def cmd_block(args) -> dict:
    if args.blocks:
        K = BlockSet.from_json(json.loads(Path(args.blocks).read_text()))
        rep = block_cover_upper(K, args.L, args.eps, seed=args.seed)
        out = rep.to_json() | {"L": args.L, "eps": format_rational(args.eps), "N": K.N}
        if rep.dominated is False:
            raise CheckFailed("block-bound-dominance", {"direct": rep.direct, "formula": rep.formula}, out)
        return out
    if args.cover_count is None or args.block_length is None:
        raise UsageError("block needs --blocks FILE or --cover-count C --block-length N")
    value = lemma51_bound(args.cover_count, args.block_length, args.L, args.eps)
    return {"formula": str(value), "cover_count_K": args.cover_count, "N": args.block_length,
            "L": args.L, "eps": format_rational(args.eps)}


def cmd_construct(args) -> dict:
    c = build_construction(args.a, args.s, args.depth)
    return c.to_json()


def _verify_construction(args) -> dict:
    c = build_construction(args.a, args.s, args.depth)
    reports = [check_invariants(c)]
    for lv in c.levels[:-1]:
        d = verify_density(lv, lv.net, lv.waypoints)
        reports.append({"invariant": "density", "level": lv.n, "status": "PASS" if d["ok"] else "FAIL", **d})
    rng = random.Random(args.seed)
    for lv in c.levels:
        reports.append(verify_expansivity(c, lv.n, q=3, seed=args.seed))
        pairs = [(random_point(c, lv.n, rng), random_point(c, lv.n, rng)) for _ in range(args.pairs)]
        bad = window_isometry(c, lv.n, pairs)
        reports.append({
            "invariant": "window-isometry", "level": lv.n, "pairs": len(pairs),
            "status": "PASS" if not bad else "FAIL",
            "witness": None if not bad else [[s.to_json() for s in bad[0][0]], [s.to_json() for s in bad[0][1]]],
        })
    for n in range(1, c.depth):
        reports.append(syndetic_check(c, n))
    return {"suite": "construction", "a": args.a, "s": format_rational(args.s), "depth": args.depth,
            "reports": reports}


def _verify_subadditivity(args) -> dict:
    reports = []
    for a, b in ((2, 1), (3, 1), (3, 2)):
        fmap = ProjectionFactor(a, b)
        for delta in args.delta_list:
            table = conditional_profile(fmap, delta, range(1, args.max_n + 1), args.eps_list)
            for eps in args.eps_list:
                v = check_profile_subadditivity(table, eps, max_total=args.max_n)
                reports.append({
                    "invariant": "subadditivity", "a": a, "b": b,
                    "delta": format_rational(delta), "eps": format_rational(eps),
                    "status": "PASS" if not v else "FAIL",
                    "witness": None if not v else v[0].to_json(),
                })
    return {"suite": "subadditivity", "reports": reports}


def _verify_waist(args) -> dict:
    reports = []
    for q in args.q_list:
        for f in corpus(q):
            t, _ = best_t(f, args.r)
            for rep in (waist_check_measure(f, args.r, t=t), waist_check_cover(f, args.r, t=t)):
                d = rep.to_json()
                reports.append({"invariant": f"waist-{rep.kind}", "map": f.name, "q": q,
                                "status": "PASS" if rep.passed else "FAIL",
                                "witness": None if rep.passed else d})
    return {"suite": "waist", "reports": reports}


def _verify_covering(args) -> dict:
    rng = random.Random(args.seed)
    reports = []
    for i in range(args.instances):
        n = rng.randint(1, 9)
        pts = [Fraction(rng.randint(0, 16), 16) for _ in range(n)]
        pts = sorted(set(pts))
        space = FiniteMetricSpace.from_function(pts, lambda u, v: abs(u - v))
        eps = Fraction(rng.randint(1, 8), 16)
        ex = cover_bounds(space, eps)
        sep = separated_lower_bound(space, eps)
        gr = cover_number_greedy(space, eps)
        ok = sep.lower <= ex.lower == ex.upper <= gr.upper
        reports.append({"invariant": "cover-sandwich", "instance": i, "status": "PASS" if ok else "FAIL",
                        "witness": None if ok else {"points": [format_rational(p) for p in pts],
                                                    "eps": format_rational(eps)}})
    return {"suite": "covering", "reports": reports}


SUITES = {
    "construction": _verify_construction,
    "subadditivity": _verify_subadditivity,
    "waist": _verify_waist,
    "covering": _verify_covering,
}


def cmd_verify(args) -> dict:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    out = {"suites": [SUITES[n](args) for n in names]}
    for suite in out["suites"]:
        for rep in suite["reports"]:
            if rep["status"] != "PASS":
                raise CheckFailed(rep["invariant"], rep.get("witness") or rep, out)
    return out


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker cap (computation is single-threaded)")
    common.add_argument("--certificates", action="store_true")

    p = argparse.ArgumentParser(prog="condmdim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file holding the command and its options")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("cover", parents=[common], help="covering number of a finite metric space")
    c.add_argument("--space", help="JSON file {points, dist}")
    c.add_argument("--grid-q", type=int, help="use the grid {0, 2^-q, ..., 1}^dim under l_inf")
    c.add_argument("--dim", type=int, default=1)
    c.add_argument("--eps", type=dyadic_arg, required=True)
    c.add_argument("--exact-cap", type=int, default=24)
    c.set_defaults(func=cmd_cover)

    pr = sub.add_parser("profile", parents=[common], help="covering profile of a system")
    pr.add_argument("--system", choices=("fullshift", "singleton"), default="fullshift")
    pr.add_argument("--a", type=int, default=1)
    pr.add_argument("--q", type=int, default=2)
    pr.add_argument("--metric", choices=(WINDOW, BOWEN_D), default=WINDOW)
    pr.add_argument("--eps", type=dyadic_list, required=True)
    pr.add_argument("--N", type=int_list, required=True)
    pr.set_defaults(func=cmd_profile)

    co = sub.add_parser("conditional", parents=[common], help="conditional profile of a factor map")
    co.add_argument("--map", choices=("projection", "identity"), default="projection")
    co.add_argument("--a", type=int, default=2)
    co.add_argument("--b", type=int, default=1)
    co.add_argument("--q", type=int)
    co.add_argument("--delta", type=dyadic_arg, default=Dyadic(1, 8))
    co.add_argument("--eps", type=dyadic_list, required=True)
    co.add_argument("--N", type=int_list, required=True)
    co.add_argument("--bracket", action="store_true", help="fiber slope brackets instead of delta-ball profiles")
    co.set_defaults(func=cmd_conditional)

    w = sub.add_parser("waist", parents=[common], help="fiber neighbourhood and cover checks on a grid map")
    w.add_argument("--map", help="GridMap JSON file")
    w.add_argument("--corpus", help="name of a bundled map")
    w.add_argument("--q", type=int, default=4, help="grid resolution for bundled maps")
    w.add_argument("--r", type=dyadic_list, default=[Dyadic(1, 8), Dyadic(1, 4), Dyadic(3, 8)])
    w.set_defaults(func=cmd_waist)

    b = sub.add_parser("block", parents=[common], help="block-system covering bound")
    b.add_argument("--blocks", help="BlockSet JSON file")
    b.add_argument("--cover-count", type=int)
    b.add_argument("--block-length", type=int)
    b.add_argument("--L", type=int, required=True)
    b.add_argument("--eps", type=dyadic_arg, required=True)
    b.set_defaults(func=cmd_block)

    k = sub.add_parser("construct", parents=[common], help="build the inductive block construction")
    k.add_argument("--a", type=int, default=1)
    k.add_argument("--s", type=rational_arg, required=True)
    k.add_argument("--depth", type=int, default=2)
    k.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    v.add_argument("--suite", choices=("all", *SUITES), default="construction")
    v.add_argument("--a", type=int, default=1)
    v.add_argument("--s", type=rational_arg, default=Fraction(1, 2))
    v.add_argument("--depth", type=int, default=2)
    v.add_argument("--pairs", type=int, default=1000)
    v.add_argument("--max-n", type=int, default=16)
    v.add_argument("--eps-list", type=dyadic_list, default=[Dyadic(1, 4), Dyadic(1, 8)])
    v.add_argument("--delta-list", type=dyadic_list, default=[Dyadic(1, 8), Dyadic(1, 16)])
    v.add_argument("--q-list", type=int_list, default=[4])
    v.add_argument("--r", type=dyadic_list, default=[Dyadic(1, 8), Dyadic(1, 4), Dyadic(3, 8)])
    v.add_argument("--instances", type=int, default=200)
    v.set_defaults(func=cmd_verify)
    return p


def config_to_argv(cfg: dict) -> list[str]:
    """``{"command": "profile", "a": 1, "eps": ["1/2"]}`` -> ``["profile", "--a", "1", "--eps", "1/2"]``."""
    if "command" not in cfg:
        raise UsageError("config needs a 'command' key")
    argv = [str(cfg["command"])]
    for key in sorted(k for k in cfg if k != "command"):
        val = cfg[key]
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
            continue
        if isinstance(val, list):
            val = ",".join(str(x) for x in val)
        argv.extend([flag, str(val)])
    return argv


def _emit(payload, args) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, rest = pre.parse_known_args(argv)
        if known.config:
            # options after the config file override or extend it
            argv = config_to_argv(json.loads(Path(known.config).read_text())) + rest
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return USAGE
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.format == "csv" and args.command not in ("profile", "conditional"):
            raise UsageError("csv output is available for profile and conditional")
        payload = args.func(args)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    except CheckFailed as exc:
        print(f"FAIL {exc.invariant}: witness {json.dumps(exc.witness, sort_keys=True, default=str)}", file=sys.stderr)
        if exc.payload:
            _emit(exc.payload, args)
        return CHECK_FAILED
    except (UsageError, ValueError, CapExceeded, OverflowError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    _emit(payload, args)
    return OK


if __name__ == "__main__":
    sys.exit(main())
