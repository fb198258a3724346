"""Command-line front end: ``spectrum-market {list,solve,simulate,sweep,run,verify,validate}``.

Exit codes: 0 success, 1 validation failure (bad config or golden mismatch),
2 solver error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MarketError, MissingGoldenError, ParseError, ValidationError
from .experiments import (
    DYNAMIC_GAMES,
    STATIC_GAMES,
    bundled_names,
    golden_root,
    load_scenario,
    run_scenario,
    verify_golden,
    write_golden,
)
from .market import CapacitySpec, DemandModel

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("spectrum_market")


def _floats(text_values):
    return [float(v) for v in text_values]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", type=Path, default=None, help="output directory (default: ./out/<scenario>)")
    p.add_argument("--tol", type=float, default=None, help="override the solver / comparison tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectrum-market", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list bundled scenarios")

    val = sub.add_parser("validate", help="check a scenario file and print field-level errors")
    val.add_argument("scenario")

    solve = sub.add_parser("solve", help="static equilibrium of a scenario, or of a market given by flags")
    solve.add_argument("scenario", nargs="?")
    solve.add_argument("--a", nargs="+", help="demand intercepts")
    solve.add_argument("--b", nargs="+", help="own-price slopes")
    solve.add_argument("--c", type=float, help="cross-price slope")
    solve.add_argument("--caps", nargs="+", help="capacities ('inf' for unlimited)")
    solve.add_argument("--leader", type=int, choices=(1, 2), help="leader-follower game with this leader")
    solve.add_argument("--theta", type=float, help="QoS-penalty game with this coefficient")
    _common(solve)

    for name, helptext in (("simulate", "run a price-dynamics scenario"),
                           ("sweep", "run a scenario with a [sweep] section"),
                           ("run", "run any scenario (or --all)")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario", nargs="?" if name == "run" else None)
        if name == "run":
            sp.add_argument("--all", action="store_true", help="run every bundled scenario")
        _common(sp)

    ver = sub.add_parser("verify", help="rerun a scenario and compare it with its golden files")
    ver.add_argument("scenario", nargs="?")
    ver.add_argument("--all", action="store_true", help="verify every bundled scenario")
    ver.add_argument("--golden", type=Path, default=None, help="golden directory (default: bundled)")
    ver.add_argument("--update", action="store_true", help="rewrite the golden files from this run")
    _common(ver)
    return ap


def _adhoc_solve(args) -> dict:
    from .stackelberg import stackelberg_ne
    from .type1 import duopoly_ne, oligopoly_ne_search
    from .type2 import Type2Config, type2_oligopoly_ne

    if args.a is None or args.b is None or args.c is None:
        raise ValidationError(["solve: give a scenario or all of --a, --b, --c"])
    a, b = np.array(_floats(args.a)), np.array(_floats(args.b))
    n = a.size
    c = np.where(np.eye(n, dtype=bool), 0.0, args.c)
    model = DemandModel(a, b, c)
    caps = CapacitySpec(_floats(args.caps) if args.caps else [math.inf] * n)
    if args.theta is not None:
        res, solve = type2_oligopoly_ne(model, None, Type2Config(args.theta, caps))
        return {**res.as_record(), **solve.as_record()}
    if args.leader is not None:
        return stackelberg_ne(model, caps, args.leader - 1).as_record()
    if n == 2:
        return duopoly_ne(model, caps).as_record()
    res, trace = oligopoly_ne_search(model, caps)
    return {**res.as_record(), "iterations": len(trace)}


def _run_one(name, args, allowed=None, need_sweep=False) -> int:
    cfg = load_scenario(name)
    if allowed is not None and cfg.game not in allowed:
        raise ValidationError([f"game: {args.command} expects one of {', '.join(allowed)}, scenario has {cfg.game}"])
    if need_sweep and cfg.sweep is None:
        raise ValidationError(["sweep: scenario has no [sweep] section"])
    out = args.out if args.out is not None else Path("out") / cfg.name
    if getattr(args, "all", False) and args.out is not None:
        out = args.out / cfg.name
    manifest = run_scenario(cfg, out, seed=args.seed, tol=args.tol)
    print(f"{cfg.name}: {len(manifest.files)} files in {out} ({manifest.timings['total']:.2f}s)")
    if not manifest.within_budget:
        log.warning("%s exceeded its %.1fs budget", cfg.name, cfg.budget_seconds)
    return EXIT_OK


def _verify_one(name, args) -> int:
    cfg = load_scenario(name)
    golden = (args.golden / cfg.name) if args.golden is not None else golden_root() / cfg.name
    manifest = run_scenario(cfg, args.out, seed=args.seed)
    if args.update:
        write_golden(manifest, golden)
        print(f"{cfg.name}: golden files written to {golden}")
        return EXIT_OK
    report = verify_golden(manifest, golden, cfg.tolerances, tol_override=args.tol)
    print(f"{cfg.name}:")
    for line in report.lines():
        print("  " + line)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list":
            for name in bundled_names():
                cfg = load_scenario(name)
                print(f"{name:45s} {cfg.game:20s} {cfg.description}")
            return EXIT_OK
        if args.command == "validate":
            load_scenario(args.scenario)
            print("ok")
            return EXIT_OK
        if args.command == "solve":
            if args.scenario is None:
                print(json.dumps(_adhoc_solve(args), indent=2, default=float))
                return EXIT_OK
            return _run_one(args.scenario, args, allowed=STATIC_GAMES)
        if args.command == "simulate":
            return _run_one(args.scenario, args, allowed=DYNAMIC_GAMES)
        if args.command == "sweep":
            return _run_one(args.scenario, args, need_sweep=True)
        if args.command in ("run", "verify"):
            if args.all:
                names = bundled_names()
            elif args.scenario:
                names = [args.scenario]
            else:
                raise ValidationError([f"{args.command}: give a scenario or --all"])
            runner = _verify_one if args.command == "verify" else _run_one
            return max(runner(n, args) for n in names)
    except (ValidationError, ParseError) as exc:
        for line in getattr(exc, "errors", None) or [str(exc)]:
            print(f"error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except MissingGoldenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MarketError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
