"""Command-line front end.

Subcommands: generate (write an instance file), decompose (report a
decomposition), maximize (run the solver against baselines), verify (check
invariants, nonzero exit on violation), bench (batch a directory into a
CSV, optionally with figures).

Exit codes: 0 success, 2 usage (argparse), 3 verification failure,
4 infeasible run configuration or cap exceeded, 5 instance/schema error.

Result JSON is deterministic for a fixed seed except for the "timing"
subobject, which carries the timestamp and wall times.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from .decompose import verify_decomposition
from .instances import (generate, instance_function, instance_to_payload,
                        load_instance, save_instance)
from .mconcave import check_exchange_property
from .optimizer import SolverConfig, lazy_greedy_baseline, maximize
from .setfn import (CapExceededError, as_mask, brute_force_max,
                    verify_monotone_submodular)
from .instances import family_decomposition

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_VERIFY = 3
EXIT_INFEASIBLE = 4
EXIT_SCHEMA = 5


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{name} must be an integer, got {raw!r}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def _load(path: str):
    try:
        return load_instance(path)
    except FileNotFoundError:
        raise _SchemaError(f"instance file not found: {path}")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _SchemaError(f"bad instance file {path}: {exc}")


class _SchemaError(Exception):
    pass


def _decomposition(inst, method: str):
    return family_decomposition(inst, method)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    params = {"n": args.n}
    if args.family == "coverage":
        params.update(points=args.points, density=args.density)
    elif args.family == "facility":
        params.update(customers=args.customers, w_max=args.w_max)
    else:
        params.update(terms=args.terms, w_max=args.w_max)
    try:
        inst = generate(args.family, params, args.seed)
    except (TypeError, ValueError) as exc:
        return _fail(EXIT_SCHEMA, f"invalid generator parameters: {exc}")
    if args.out:
        save_instance(inst, args.out, seed=args.seed)
    else:
        doc = instance_to_payload(inst, seed=args.seed)
        sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def cmd_decompose(args) -> int:
    inst = _load(args.instance)
    f = instance_function(inst)
    try:
        dec = _decomposition(inst, args.method)
    except (CapExceededError, ValueError) as exc:
        return _fail(EXIT_INFEASIBLE, f"decomposition failed: {exc}")
    doc = {"schema_version": SCHEMA_VERSION,
           "family": instance_to_payload(inst)["family"], "n": dec.n,
           "method": dec.method, "c": dec.c, "gamma_h": dec.gamma_h,
           "meta": dec.meta}
    if dec.n <= args.check_cap:
        doc["verify"] = verify_decomposition(f, dec, cap=args.check_cap)
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _run_algorithms(inst, label: str, args):
    f = instance_function(inst)
    n = f.n
    k = args.k
    if k > n or k < 0:
        raise ValueError(f"k={k} infeasible for n={n}")
    dec = _decomposition(inst, args.method)
    cfg = SolverConfig(epsilon=args.epsilon, delta_t=args.delta_t,
                       trials=args.trials, seed=args.seed,
                       oracle_mode=args.oracle_mode, opt_cap=args.opt_cap)
    algos = {}
    walls = {}
    if not args.only_baselines:
        t0 = time.perf_counter()
        X, diag = maximize(dec.g, dec.h, k, cfg)
        walls["continuous"] = time.perf_counter() - t0
        algos["continuous"] = {
            "value": f.eval_mask(as_mask(X, n)), "set": sorted(X),
            "oracle_calls": diag.get("oracle_calls_g"),
            "alpha": diag.get("alpha"), "beta": diag.get("beta"),
            "cells": diag.get("cells"), "cell_means": diag.get("cell_means"),
            "witness_support": diag.get("witness_support")}
    for name in args.baselines:
        t0 = time.perf_counter()
        before = f.calls
        Y, val = lazy_greedy_baseline(f, k)
        walls[name] = time.perf_counter() - t0
        algos[name] = {"value": val, "set": sorted(Y),
                       "oracle_calls": f.calls - before}
    opt = None
    if n <= args.opt_cap:
        O, oval = brute_force_max(f, k, exact_size=True, cap=args.opt_cap)
        opt = {"value": oval, "set": sorted(O)}
    ratios = {}
    if opt and opt["value"] > 0:
        for name, rec in algos.items():
            ratios[name] = rec["value"] / opt["value"]
    bounds = {"curvature": (1 - dec.c / math.e - args.epsilon)
              if dec.c is not None else None,
              "theorem": (1 - dec.gamma_h / math.e - args.epsilon)
              if dec.gamma_h is not None else None}
    doc = {"schema_version": SCHEMA_VERSION,
           "instance": {"label": label,
                        "family": instance_to_payload(inst)["family"], "n": n},
           "run": {"k": k, "epsilon": args.epsilon, "delta_t": args.delta_t,
                   "trials": args.trials, "seed": args.seed,
                   "oracle_mode": args.oracle_mode, "method": args.method,
                   "only_baselines": args.only_baselines},
           "decomposition": {"method": dec.method, "c": dec.c,
                             "gamma_h": dec.gamma_h, "meta": dec.meta},
           "algorithms": algos, "opt": opt, "ratios": ratios,
           "bounds": bounds,
           "timing": {"timestamp": datetime.now(timezone.utc).isoformat(),
                      "wall_s": walls}}
    return doc


def _csv_rows(doc: dict):
    rows = []
    for name, rec in doc["algorithms"].items():
        rows.append({
            "instance": doc["instance"]["label"],
            "family": doc["instance"]["family"],
            "n": doc["instance"]["n"], "k": doc["run"]["k"],
            "algorithm": name, "value": rec["value"],
            "opt": doc["opt"]["value"] if doc["opt"] else "",
            "ratio": doc["ratios"].get(name, ""),
            "bound_gamma": doc["bounds"]["theorem"]
            if doc["bounds"]["theorem"] is not None else "",
            "bound_curvature": doc["bounds"]["curvature"]
            if doc["bounds"]["curvature"] is not None else "",
            "gamma_h": doc["decomposition"]["gamma_h"]
            if doc["decomposition"]["gamma_h"] is not None else "",
            "c": doc["decomposition"]["c"],
            "method": doc["decomposition"]["method"],
            "oracle_calls": rec.get("oracle_calls", ""),
            "seed": doc["run"]["seed"]})
    return rows


CSV_FIELDS = ["instance", "family", "n", "k", "algorithm", "value", "opt",
              "ratio", "bound_gamma", "bound_curvature", "gamma_h", "c",
              "method", "oracle_calls", "seed"]


def _write_csv(rows, out: str | None) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    _emit(buf.getvalue(), out)


def cmd_maximize(args) -> int:
    inst = _load(args.instance)
    try:
        doc = _run_algorithms(inst, args.instance, args)
    except (CapExceededError, ValueError) as exc:
        return _fail(EXIT_INFEASIBLE, f"infeasible run: {exc}")
    if args.format == "csv":
        _write_csv(_csv_rows(doc), args.out)
    else:
        _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = _load(args.instance)
    f = instance_function(inst)
    report = {"schema_version": SCHEMA_VERSION, "level": args.level,
              "checks": {}}
    failed = False
    try:
        if args.level in ("function", "all"):
            ok, witness = verify_monotone_submodular(f, cap=args.check_cap)
            report["checks"]["monotone_submodular"] = bool(ok)
            if not ok:
                failed = True
                report["checks"]["witness"] = {
                    "kind": witness.kind, "X": sorted(witness.X),
                    "i": witness.i, "j": witness.j}
        if args.level == "mnat":
            ok, viol = check_exchange_property(f, cap=args.check_cap)
            report["checks"]["exchange"] = bool(ok)
            if not ok:
                failed = True
                report["checks"]["witness"] = {
                    "X": sorted(viol.X), "Y": sorted(viol.Y), "i": viol.i}
        if args.level in ("decomposition", "all"):
            dec = _decomposition(inst, args.method)
            rep = verify_decomposition(f, dec, cap=args.check_cap)
            report["checks"]["decomposition"] = rep
            if not rep["ok"]:
                failed = True
    except CapExceededError as exc:
        return _fail(EXIT_INFEASIBLE, f"cap exceeded: {exc}")
    report["ok"] = not failed
    _emit(json.dumps(report, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_bench(args) -> int:
    paths = sorted(Path(args.dir).glob("*.json"))
    if not paths:
        return _fail(EXIT_SCHEMA, f"no instance files in {args.dir}")
    rows = []
    docs = []
    scatter = []
    for path in paths:
        inst = _load(str(path))
        eff = argparse.Namespace(**vars(args))
        eff.k = min(args.k, instance_function(inst).n)
        try:
            doc = _run_algorithms(inst, path.stem, eff)
        except (CapExceededError, ValueError) as exc:
            return _fail(EXIT_INFEASIBLE, f"infeasible run for {path}: {exc}")
        docs.append(doc)
        rows.extend(_csv_rows(doc))
        scatter.append({"c": doc["decomposition"]["c"],
                        "gamma_h": doc["decomposition"]["gamma_h"]})
    if args.format == "json":
        _emit(json.dumps({"schema_version": SCHEMA_VERSION, "runs": docs},
                         sort_keys=True, indent=2) + "\n", args.out)
    else:
        _write_csv(rows, args.out)
    if args.figures:
        from . import report  # defer matplotlib import to this branch
        base = Path(args.out) if args.out else Path("bench")
        fig_rows = [dict(r, ratio=r["ratio"] if r["ratio"] != "" else None,
                         bound_gamma=r["bound_gamma"] or None,
                         bound_curvature=r["bound_curvature"] or None)
                    for r in rows]
        report.ratio_bound_figure(
            fig_rows, base.with_suffix("").as_posix() + "_ratio.png")
        report.curvature_scatter_figure(
            scatter, base.with_suffix("").as_posix() + "_curvature.png")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="submax",
        description="decompose and maximize monotone submodular functions "
                    "under a cardinality constraint")
    sub = p.add_subparsers(dest="command", required=True)

    opt_cap = _env_int("SUBMAX_OPT_CAP", 16)
    check_cap = _env_int("SUBMAX_CHECK_CAP", 12)

    def common_run(sp):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--method", default="family",
                        choices=["family", "trivial", "quadratic"])
        sp.add_argument("--check-cap", type=int, default=check_cap)
        sp.add_argument("--out")

    g = sub.add_parser("generate", help="write a seeded benchmark instance")
    g.add_argument("--family", required=True,
                   choices=["coverage", "facility", "wrs"])
    g.add_argument("--n", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points", type=int, default=20)
    g.add_argument("--density", type=float, default=0.3)
    g.add_argument("--customers", type=int, default=5)
    g.add_argument("--terms", type=int, default=3)
    g.add_argument("--w-max", type=int, default=9)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("decompose", help="report a decomposition of f")
    common_run(d)
    d.set_defaults(func=cmd_decompose)

    def solver_flags(sp):
        sp.add_argument("--k", type=int, required=True)
        sp.add_argument("--epsilon", type=float, default=0.1)
        sp.add_argument("--delta-t", type=float, default=None)
        sp.add_argument("--trials", type=int, default=20)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--oracle-mode", action="store_true")
        sp.add_argument("--opt-cap", type=int, default=opt_cap)
        sp.add_argument("--format", default="json", choices=["json", "csv"])
        sp.add_argument("--baselines", nargs="*", default=["lazy_greedy"],
                        choices=["lazy_greedy"])
        sp.add_argument("--only-baselines", action="store_true")

    m = sub.add_parser("maximize", help="run the solver and baselines")
    common_run(m)
    solver_flags(m)
    m.set_defaults(func=cmd_maximize)

    v = sub.add_parser("verify", help="check invariants; exit 3 on violation")
    common_run(v)
    v.add_argument("--level", default="all",
                   choices=["function", "mnat", "decomposition", "all"])
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="batch-run a directory of instances")
    b.add_argument("--dir", required=True)
    b.add_argument("--method", default="family",
                   choices=["family", "trivial", "quadratic"])
    b.add_argument("--check-cap", type=int, default=check_cap)
    b.add_argument("--out")
    b.add_argument("--figures", action="store_true",
                   help="also render ratio and curvature figures as PNGs")
    solver_flags(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _SchemaError as exc:
        return _fail(EXIT_SCHEMA, str(exc))


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
