"""Command-line surface: algebra ops on M-map files, weak-value queries,
theorem-verification batches, and report projection.

Exit codes: 0 success, 1 verification failure, 2 malformed input,
3 domain error (message names the violated precondition).  The default
comparison tolerance can be overridden with the MOMALG_TOL environment
variable.  Batch runs are reproducible: every random object derives from
the per-run seed through fixed substreams, and the manifest records the
full command.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .algebra import (
    convolve,
    exp_star,
    inverse_star,
    is_factorizing,
    log1p_series,
    log_star,
    raise_label,
)
from .combinatorics import Multiset
from .errors import DomainError, InputFormatError, MomalgError
from .experiments import DEFAULT_TOLERANCES, random_config, run_verification
from .serialization import (
    SCHEMA,
    load_json,
    mmap_from_dict,
    mmap_to_dict,
    report_rows_from_json,
    reports_to_csv,
    save_json,
    REPORT_CSV_COLUMNS,
)
from .weakvalues import (
    script_D,
    script_D_monte_carlo,
    sequential_weak_value,
    simultaneous_weak_value,
    thermal_E,
)
from .serialization import context_from_dict

SCENARIO_ALIASES = {
    "thm1": "sequential-per-subset",
    "thm2": "simultaneous-evolution",   # forced H_S = 0
    "thm3": "sequential-all-coupled",
    "thm4": "simultaneous-evolution",
    "thermal": "thermal",
    "multiset": "multiset",
    "genfun": "genfun",
}


def _default_tol(scenario: str) -> float:
    env = os.environ.get("MOMALG_TOL")
    if env:
        return float(env)
    return DEFAULT_TOLERANCES[scenario]


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momalg",
        description="moment-algebra operations and weak-measurement "
                    "cumulant verification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    alg = sub.add_parser("algebra", help="star operations on M-map files")
    alg.add_argument("op", choices=["convolve", "log", "exp", "inverse",
                                    "series", "raise", "factorizing-check"])
    alg.add_argument("inputs", nargs="+", help="input M-map JSON file(s)")
    alg.add_argument("-o", "--output", help="output file (default stdout)")
    alg.add_argument("--depth", type=int, default=30,
                     help="series truncation depth")
    alg.add_argument("--label", type=int, default=1,
                     help="label for the raising operator")
    alg.add_argument("--cut", default="",
                     help="comma-separated labels of one side of the "
                          "bipartition for factorizing-check")
    alg.add_argument("--tol", type=float, default=None)

    wv = sub.add_parser("weak-values", help="evaluate weak-value queries")
    wv.add_argument("query", help="query JSON file")
    wv.add_argument("-o", "--output", help="output file (default stdout)")

    ver = sub.add_parser("verify", help="run theorem verification batches")
    ver.add_argument("scenario", choices=sorted(SCENARIO_ALIASES))
    ver.add_argument("--seeds", default="1", help="N, N,M,... or A..B")
    ver.add_argument("--pointers", type=int, default=3)
    ver.add_argument("--sysdim", type=int, default=2)
    ver.add_argument("--pointer-dim", type=int, default=2)
    ver.add_argument("--tau", type=float, nargs="+", default=[1.0])
    ver.add_argument("--beta", type=float, nargs="+", default=[1.0])
    ver.add_argument("--hs", choices=["random", "zero"], default="random")
    ver.add_argument("--copies", type=int, default=2,
                     help="pointer copies per observable (multiset)")
    ver.add_argument("--vars", type=int, default=3,
                     help="number of variables (genfun)")
    ver.add_argument("--samples", type=int, default=0,
                     help="Monte-Carlo cross-check samples (thm4)")
    ver.add_argument("--tol", type=float, default=None)
    ver.add_argument("--config", default=None,
                     help="explicit config JSON (matrices instead of "
                          "generator seeds); other instance flags ignored")
    ver.add_argument("--out", default="reports", help="output directory")

    rep = sub.add_parser("report", help="project a report JSON to CSV")
    rep.add_argument("report", help="report JSON file")
    rep.add_argument("--csv", help="CSV output path (default stdout)")

    return parser


# ---------------------------------------------------------------------------


def _load_mmap(path: str):
    return mmap_from_dict(load_json(path), where=path)


def _emit(payload: dict, output: str | None) -> None:
    if output:
        save_json(output, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_algebra(args) -> int:
    op = args.op
    f = _load_mmap(args.inputs[0])
    if op == "convolve":
        if len(args.inputs) != 2:
            raise InputFormatError("convolve needs exactly two inputs")
        g = _load_mmap(args.inputs[1])
        _emit(mmap_to_dict(convolve(f, g)), args.output)
        return 0
    if op == "log":
        _emit(mmap_to_dict(log_star(f)), args.output)
        return 0
    if op == "exp":
        _emit(mmap_to_dict(exp_star(f)), args.output)
        return 0
    if op == "inverse":
        _emit(mmap_to_dict(inverse_star(f)), args.output)
        return 0
    if op == "series":
        result, deltas = log1p_series(f, args.depth, with_deltas=True)
        payload = mmap_to_dict(result)
        payload["truncation_delta"] = [
            {"m": list(a.elements()), "abs": d} for a, d in deltas.items()]
        _emit(payload, args.output)
        return 0
    if op == "raise":
        _emit(mmap_to_dict(raise_label(f, args.label)), args.output)
        return 0
    # factorizing-check
    if not args.cut:
        raise InputFormatError("factorizing-check needs --cut LABELS")
    side = {int(t) for t in args.cut.split(",")}
    other = set(range(1, f.n + 1)) - side
    tol = args.tol if args.tol is not None else \
        float(os.environ.get("MOMALG_TOL", "1e-10"))
    verdict = is_factorizing(f, side, other, tol)
    _emit({"schema": SCHEMA, "factorizing": bool(verdict),
           "cut": sorted(side), "tol": tol}, args.output)
    return 0


def cmd_weak_values(args) -> int:
    payload = load_json(args.query)
    ctx = context_from_dict(payload.get("context", {}))
    mode = payload.get("mode", "auto")
    samples = int(payload.get("samples", 100_000))
    seed = int(payload.get("seed", 0))
    subsets = payload.get("subsets")
    if subsets is None:
        raise InputFormatError(f"{args.query}: missing 'subsets'")
    values = []
    for raw in subsets:
        a = Multiset(raw)
        entry = {"m": list(a.elements())}
        use = mode
        if mode == "auto":
            use = {"sequential": "sequential", "evolution": "jet",
                   "thermal": "thermal"}[ctx.kind]
        if use == "sequential":
            v = sequential_weak_value(ctx, a)
        elif use == "simultaneous":
            v = simultaneous_weak_value(ctx, a)
        elif use == "jet":
            v = script_D(ctx, a)
        elif use == "thermal":
            v = thermal_E(ctx, a)
        elif use == "mc":
            v, se = script_D_monte_carlo(ctx, a, samples, seed)
            entry["se"] = se
        else:
            raise InputFormatError(f"unknown mode {use!r}")
        entry["re"], entry["im"] = v.real, v.imag
        values.append(entry)
    _emit({"schema": SCHEMA, "kind": ctx.kind, "values": values},
          args.output)
    return 0


def _verify_configs(args):
    scenario = SCENARIO_ALIASES[args.scenario]
    tol = args.tol if args.tol is not None else _default_tol(scenario)
    zero_h = args.hs == "zero" or args.scenario == "thm2"
    for seed in _parse_seeds(args.seeds):
        if scenario == "simultaneous-evolution":
            for tau in args.tau:
                yield {"tau": tau}, random_config(
                    scenario, seed, n_pointers=args.pointers,
                    system_dim=args.sysdim, pointer_dim=args.pointer_dim,
                    tau=tau, zero_hamiltonian=zero_h, tolerance=tol,
                    mc_samples=args.samples)
        elif scenario == "thermal":
            for beta in args.beta:
                yield {"beta": beta}, random_config(
                    scenario, seed, n_pointers=args.pointers,
                    system_dim=args.sysdim, pointer_dim=args.pointer_dim,
                    beta=beta, tolerance=tol)
        elif scenario == "multiset":
            yield {}, random_config(
                scenario, seed, system_dim=args.sysdim,
                pointer_dim=args.pointer_dim, beta=args.beta[0],
                tau=args.tau[0], copies=(args.copies,), tolerance=tol)
        elif scenario == "genfun":
            yield {}, random_config(scenario, seed, n_vars=args.vars,
                                    tolerance=tol)
        else:
            yield {}, random_config(
                scenario, seed, n_pointers=args.pointers,
                system_dim=args.sysdim, pointer_dim=args.pointer_dim,
                tolerance=tol)


def _config_iter(args):
    if args.config:
        from .serialization import config_from_dict
        payload = load_json(args.config)
        cfg = config_from_dict(payload, where=args.config)
        expected = SCENARIO_ALIASES[args.scenario]
        if cfg.scenario != expected:
            raise InputFormatError(
                f"{args.config}: scenario {cfg.scenario!r} does not match "
                f"requested {expected!r}")
        if args.tol is not None:
            cfg.tolerance = args.tol
        yield {}, cfg
        return
    yield from _verify_configs(args)


def cmd_verify(args) -> int:
    reports = []
    paths = []
    for extras, cfg in _config_iter(args):
        rep = run_verification(cfg)
        reports.append(rep)
        tag = "_".join([f"seed{cfg.seed}"] +
                       [f"{k}{v:g}" for k, v in extras.items()])
        path = os.path.join(args.out, f"report_{args.scenario}_{tag}.json")
        save_json(path, rep.to_json_dict())
        paths.append(path)

    csv_path = os.path.join(args.out, f"report_{args.scenario}.csv")
    reports_to_csv(reports, csv_path)
    manifest = {
        "schema": SCHEMA,
        "command": ["verify", args.scenario, "--seeds", args.seeds],
        "argv": sys.argv[1:],
        "scenario": SCENARIO_ALIASES[args.scenario],
        "reports": [os.path.basename(p) for p in paths],
        "csv": os.path.basename(csv_path),
    }
    save_json(os.path.join(args.out, f"manifest_{args.scenario}.json"),
              manifest)

    header = f"{'scenario':10s} {'seed':>6s} {'status':24s} " \
             f"{'records':>7s} {'max_error':>12s} {'result':>7s}"
    print(header)
    print("-" * len(header))
    n_fail = n_skip = 0
    for rep in reports:
        if rep.status != "ok":
            n_skip += 1
            verdict = "SKIP"
        elif rep.passed:
            verdict = "pass"
        else:
            n_fail += 1
            verdict = "FAIL"
        print(f"{args.scenario:10s} {str(rep.seed):>6s} {rep.status:24s} "
              f"{len(rep.records):>7d} {rep.max_abs_error:>12.3e} "
              f"{verdict:>7s}")
    print(f"\n{len(reports)} run(s): {len(reports) - n_fail - n_skip} "
          f"passed, {n_fail} failed, {n_skip} skipped "
          f"-> reports in {args.out}/")
    return 1 if n_fail else 0


def cmd_report(args) -> int:
    payload = load_json(args.report)
    rows = list(report_rows_from_json(payload))
    if args.csv:
        directory = os.path.dirname(os.path.abspath(args.csv))
        os.makedirs(directory, exist_ok=True)
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=REPORT_CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(all="raise", under="ignore")
    try:
        if args.command == "algebra":
            return cmd_algebra(args)
        if args.command == "weak-values":
            return cmd_weak_values(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "report":
            return cmd_report(args)
        raise InputFormatError(f"unknown command {args.command!r}")
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except MomalgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
