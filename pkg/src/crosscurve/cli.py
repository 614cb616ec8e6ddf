"""Command-line driver.

Exit codes: 0 success, 1 check failure or module error, 2 usage, 3 IO.
Reports are JSON with a ``schema`` field and 17-digit floats; identical
arguments and seeds give byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .core import VerifierConfig, conv_check, lmp_check, merge_reports, nncc_check, one_convexity_check, pc_check
from .errors import CrosscurveError, PreconditionError
from .families import geodesic_for, make_family, scan_setup
from .gw_uot import GaugedSpace, gh_distance, gw_nncc_check, gw_solve_tiny
from .mtw import nncc_scan
from .reporting import SCHEMA_VERSION, dumps
from .transport import GLUES, counterexample_lmp, random_measure, wasserstein_nncc_check

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


def thread_count() -> int:
    raw = os.environ.get("CROSSCURVE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise UsageError(f"CROSSCURVE_THREADS must be an integer, got {raw!r}") from exc


def ordered_map(fn: Callable, items: Iterable) -> list:
    """Map in input order, on up to CROSSCURVE_THREADS threads."""
    items = list(items)
    n = thread_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- output helpers ------------------------------------------------------------------------------


def _write_text(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise OutputError(f"{path} exists; pass --force to overwrite")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OutputError(str(exc)) from exc


def _emit(payload: dict, args) -> None:
    text = dumps({"schema": SCHEMA_VERSION, **payload})
    out = getattr(args, "out", None)
    if out:
        _write_text(Path(out), text, args.force)
    else:
        sys.stdout.write(text)


def _load_json(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from exc


# -- subcommands ---------------------------------------------------------------------------------


def _family_spec(args) -> dict:
    spec = {"family": args.family}
    if args.dim is not None:
        spec["dim"] = args.dim
    spec.update(args.family_params or {})
    return spec


def cmd_verify(args) -> int:
    try:
        family = make_family(_family_spec(args))
    except (KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    cfg = VerifierConfig(n_y=args.n_y, seed=args.seed, tol=args.tol)
    check = args.check

    streams = np.random.SeedSequence(args.seed).spawn(args.trials)

    def trial(k: int):
        rng = np.random.default_rng(streams[k])
        tcfg = cfg.replace(seed=args.seed + k)
        x0, x1, yb = family.random_triple(rng)
        if check in ("one_convex", "pc"):
            geo = geodesic_for(family, x0, x1)
            if check == "pc":
                return pc_check(geo, family.cost, tcfg)
            seg = family.segment(x0, x1, yb)
            return one_convexity_check(seg, family.cost, tcfg)
        seg = family.segment(x0, x1, yb)
        fn = {"nncc": nncc_check, "lmp": lmp_check, "conv": conv_check}[check]
        return fn(seg, family.cost, tcfg)

    try:
        reports = ordered_map(trial, range(args.trials))
    except PreconditionError as exc:
        if check in ("one_convex", "pc"):
            raise UsageError(str(exc)) from exc
        raise
    report = merge_reports(reports)
    violated = not report.passed
    ok = violated if args.expect_fail else report.passed
    _emit(
        {
            "command": "verify",
            "check": check,
            "family": _family_spec(args),
            "trials": args.trials,
            "seed": args.seed,
            "expect_fail": bool(args.expect_fail),
            "ok": ok,
            "report": report.to_dict(),
        },
        args,
    )
    return EXIT_OK if ok else EXIT_FAIL


def cmd_counterexample(args) -> int:
    res = counterexample_lmp(n_s=args.n_s, n_t=args.n_t)
    endpoints = max(abs(res.f_mu1[0]), abs(res.f_mu1[-1]), abs(res.f_mu2[0]), abs(res.f_mu2[-1]))
    confirmed = endpoints <= 1e-12 and res.min_max > args.tol
    if args.out_dir:
        out = Path(args.out_dir)
        curves = {"mu1": res.f_mu1, "mu2": res.f_mu2}
        for k, t in enumerate(res.t_grid):
            curves[f"t{t:.2f}"] = res.f_t[k]
        for name, f in curves.items():
            rows = ["s,f"] + [f"{s:.17g},{v:.17g}" for s, v in zip(res.s, f)]
            _write_text(out / f"f_{name}.csv", "\n".join(rows) + "\n", args.force)
        args.out = str(out / "report.json")
    _emit(
        {
            "command": "counterexample",
            "n_s": args.n_s,
            "t_grid": res.t_grid,
            "endpoint_max_abs": endpoints,
            "min_over_t_max_over_s": res.min_max,
            "violation_confirmed": confirmed,
            "report": res.report.to_dict(),
        },
        args,
    )
    return EXIT_OK if confirmed else EXIT_FAIL


def cmd_mtw(args) -> int:
    try:
        cost, region = scan_setup(args.cost, args.dim)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    summary = nncc_scan(cost, region, args.samples, args.seed)
    ok = args.expect is None or summary.classification == args.expect
    _emit({"command": "mtw", "cost": args.cost, "scan": summary.to_dict(), "expected": args.expect, "ok": ok}, args)
    return EXIT_OK if ok else EXIT_FAIL


LIFT_TOL = {"hilbert": 1e-8, "sphere": 1e-6, "monge": 1e-8}


def cmd_lift(args) -> int:
    if args.base not in LIFT_TOL:
        raise UsageError(f"unknown lift base {args.base!r}; known: {sorted(LIFT_TOL)}")
    family = make_family({"family": args.base})
    tol = args.tol if args.tol is not None else LIFT_TOL[args.base]
    cfg = VerifierConfig(n_y=args.sigmas, seed=args.seed, tol=tol)
    mus = [random_measure(args.atoms, seed=args.seed * 3 + k, sample_point=family.sample_base) for k in range(3)]
    glues = list(GLUES) if args.glue_search else ["independent"]
    runs = []
    for name in glues:
        report, residual = wasserstein_nncc_check(*mus, family, cfg, glue_fn=GLUES[name])
        runs.append({"glue": name, "report": report.to_dict(), "plan_residual": residual})
        if report.passed:
            break
    passed = runs[-1]["report"]["passed"] and runs[-1]["plan_residual"] <= 1e-8
    _emit({"command": "lift", "base": args.base, "atoms": args.atoms, "seed": args.seed, "runs": runs, "ok": passed}, args)
    return EXIT_OK if passed else EXIT_FAIL


def _gauged(path: str) -> GaugedSpace:
    try:
        return GaugedSpace.from_dict(_load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_gw(args) -> int:
    X, Y = _gauged(args.x), _gauged(args.y)
    if args.x1:
        X1 = _gauged(args.x1)
        report = gw_nncc_check(X, X1, Y, VerifierConfig(n_y=args.tests, seed=args.seed, tol=args.tol))
        _emit({"command": "gw", "mode": "nncc", "report": report.to_dict()}, args)
        return EXIT_OK if report.passed else EXIT_FAIL
    res = gw_solve_tiny(X, Y)
    _emit(
        {"command": "gw", "mode": "solve", "value": res.value, "coupling": res.coupling.plan, "certified": res.certified},
        args,
    )
    return EXIT_OK if res.certified else EXIT_FAIL


def _metric(path: str) -> np.ndarray:
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get("metric", data.get("gauge"))
    try:
        return np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: not a distance matrix") from exc


def cmd_gh(args) -> int:
    value = gh_distance(_metric(args.x), _metric(args.y))
    _emit({"command": "gh", "value": value}, args)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------------


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--force", action="store_true", help="allow overwriting existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crosscurve", description="Sampled cross-curvature and NNCC verifiers.")
    parser.add_argument("--config", help="JSON file with default values for the subcommand's options")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a segment check on random triples of a cost family")
    p.add_argument("--check", choices=["nncc", "lmp", "conv", "one_convex", "pc"], default="nncc")
    p.add_argument("--family", default="hilbert")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--family-params", type=json.loads, default=None, help="extra family arguments as JSON")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--n-y", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--expect-fail", action="store_true", help="succeed only if a violation is found")
    _add_output(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("counterexample", help="f(s) curves of the log-distance lift counterexample")
    p.add_argument("--n-s", type=int, default=101)
    p.add_argument("--n-t", type=int, default=11)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out-dir", help="directory for CSV files and report.json")
    _add_output(p)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("mtw", help="finite-difference MTW tensor scan")
    p.add_argument("--cost", default="sphere")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--expect", choices=["nncc-consistent", "mtw-only-consistent", "neither"], default=None)
    _add_output(p)
    p.set_defaults(func=cmd_mtw)

    p = sub.add_parser("lift", help="Wasserstein-level NNCC check of a lifted segment")
    p.add_argument("--base", default="hilbert")
    p.add_argument("--atoms", type=int, default=5)
    p.add_argument("--sigmas", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--glue-search", action="store_true", help="try other glues when the default one fails")
    _add_output(p)
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("gw", help="Gromov-Wasserstein solve or segment check on tiny gauged spaces")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--x1", help="second endpoint; runs the NNCC check of the segment from --x to --x1")
    p.add_argument("--tests", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    _add_output(p)
    p.set_defaults(func=cmd_gw)

    p = sub.add_parser("gh", help="Gromov-Hausdorff distance of two small metric spaces")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    _add_output(p)
    p.set_defaults(func=cmd_gh)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    data = _load_json(known.config)
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    names = [a for a in argv if a in sub.choices]
    if not names:
        return
    subparser = sub.choices[names[0]]
    dests = {a.dest for a in subparser._actions}
    cleaned = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(cleaned) - dests)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    subparser.set_defaults(**cleaned)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"crosscurve: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OutputError as exc:
        print(f"crosscurve: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CrosscurveError as exc:
        print(f"crosscurve: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
