"""Command-line entry point: ``chaosbounds <command> [options]``.

Exit codes: 0 success or pass, 1 an inequality was violated, 2 usage or
input error, 3 a capacity guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, bounds, nets, oracle, rng
from .errors import CapacityError, PostconditionError, ValidationError
from .norms import AlsConfig, alpha_s, alphas
from .tensor import CoefficientTensor, load_tensor

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3
MIN_MC_SAMPLES = 10**4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p: argparse.ArgumentParser, tensor_required: bool = True) -> None:
    p.add_argument("--tensor", required=tensor_required, help="tensor JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=AlsConfig.restarts)
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chaosbounds", description="Moment and tail bounds for decoupled Gaussian chaos.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("norms", help="alpha_s values with argmax partitions")
    _common(p)
    p.add_argument("--s", type=int, help="only this number of blocks")

    p = sub.add_parser("bound", help="moment bound and optional tail bound")
    _common(p)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--x", type=float)

    p = sub.add_parser("verify", help="compare exact/MC moments with the bound")
    _common(p)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_WICK_BUDGET)

    p = sub.add_parser("nets", help="small-ball probability check over a grid of t")
    _common(p)
    p.add_argument("--t", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    p.add_argument("--point", help="JSON list of d-1 vectors (default: zeros)")
    p.add_argument("--samples", type=int, default=10**5)

    p = sub.add_parser("partition", help="partition a finite set U into next-level parts")
    _common(p)
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--N", type=int, default=0)
    p.add_argument("--r", type=int, default=20)
    p.add_argument("--C", type=float, default=1.0, help="constant in the reported cardinality budget")
    p.add_argument("--U", help="JSON list of vector tuples (default: r random points in half-balls)")

    p = sub.add_parser("fit-c", help="smallest C making the bound hold on a tensor family")
    _common(p, tensor_required=False)
    p.add_argument("tensors", nargs="*", help="tensor JSON files (in addition to --tensor)")
    p.add_argument("--M", type=int, nargs="+", default=[1])
    p.add_argument("--x", type=float, nargs="*", default=[])
    p.add_argument("--samples", type=int, default=10**5)
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_WICK_BUDGET)
    return ap


def provenance(args: argparse.Namespace) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "output"}
    return {"config": config, "seed": args.seed,
            "versions": {"chaosbounds": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()}}


def _cfg(args) -> AlsConfig:
    return AlsConfig(restarts=args.restarts, seed=args.seed)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o)}")


def _clean(o):
    """Replace non-finite floats so the report is strict JSON."""
    if isinstance(o, float) and not math.isfinite(o):
        return None if math.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def emit(args, report: dict, header: list[str], rows: list[list]) -> None:
    if args.format == "json":
        text = json.dumps(_clean({**report, "provenance": provenance(args)}), sort_keys=True,
                          indent=2, default=_json_default) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------

def cmd_norms(args) -> int:
    A = load_tensor(args.tensor)
    cfg = _cfg(args)
    if args.s is not None:
        results = [(args.s, alpha_s(A, args.s, cfg))]
    else:
        results = list(enumerate(alphas(A, cfg), start=1))
    rows = [[s, r.value, r.exact, str(r.partition)] for s, r in results]
    report = {"dims": list(A.dims),
              "alphas": [{"s": s, "value": r.value, "exact": r.exact, "partition": str(r.partition)}
                         for s, r in results]}
    emit(args, report, ["s", "value", "exact", "partition"], rows)
    return EXIT_OK


def cmd_bound(args) -> int:
    A = load_tensor(args.tensor)
    rep = bounds.bound_report(A, args.M, args.C, args.x, _cfg(args), args.seed)
    rows = [[rep.M, rep.C_used, a.s, a.value, a.exact, c, rep.raw_factor, rep.log_moment_bound,
             rep.tail_x, rep.tail_bound] for a, c in zip(rep.alphas, rep.contributions)]
    emit(args, rep.to_dict(), ["M", "C", "s", "alpha", "exact", "contribution", "raw_factor",
                               "log_moment_bound", "tail_x", "tail_bound"], rows)
    return EXIT_OK


def verify_report(A: CoefficientTensor, M: int, C: float, samples: int, seed: int,
                  budget: int, cfg: AlsConfig) -> dict:
    rep = bounds.moment_bound(A, M, C, cfg, seed)
    try:
        exact, source = oracle.wick_moment(A, M, budget), "wick"
    except CapacityError:
        if samples < MIN_MC_SAMPLES:
            raise ValidationError(f"oracle budget exceeded and --samples < {MIN_MC_SAMPLES}")
        exact, source = None, "mc_fallback"
    mc = oracle.empirical_statistic(A, oracle.Statistic("moment", M), samples, seed, cfg)
    reference = exact if exact is not None else mc.estimate
    # relative slack 1e-12 absorbs rounding when the bound is tight
    passed = bool(rep.log_moment_bound >= math.log(reference) - 1e-12) if reference > 0 else True
    ratio = (math.exp((rep.log_moment_bound - math.log(reference)) / (2 * M))
             if reference > 0 and rep.raw_factor > 0 else None)
    return {"dims": list(A.dims), "M": M, "C": C, "oracle": exact, "oracle_source": source,
            "fallback_warning": exact is None, "mc": mc.to_dict(), "bound": rep.moment_bound,
            "log_bound": rep.log_moment_bound, "ratio": ratio, "pass": passed,
            "alphas": [a.value for a in rep.alphas]}


def cmd_verify(args) -> int:
    A = load_tensor(args.tensor)
    r = verify_report(A, args.M, args.C, args.samples, args.seed, args.budget, _cfg(args))
    row = [r["M"], r["oracle"], r["oracle_source"], r["mc"]["estimate"], r["mc"]["ci95"][0],
           r["mc"]["ci95"][1], r["bound"], r["C"], r["ratio"], r["pass"]]
    emit(args, r, ["M", "oracle", "oracle_source", "mc_estimate", "mc_lo", "mc_hi", "bound", "C",
                   "ratio", "pass"], [row])
    return EXIT_OK if r["pass"] else EXIT_VIOLATION


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def cmd_nets(args) -> int:
    A = load_tensor(args.tensor)
    if A.order < 2:
        raise ValidationError("nets needs a tensor of order >= 2")
    x = _load_json(args.point) if args.point else [np.zeros(n) for n in A.dims[:-1]]
    checks = [nets.chaos_small_ball_check(A, x, t, args.samples, args.seed, _cfg(args)) for t in args.t]
    emit(args, {"dims": list(A.dims), "checks": [c.to_dict() for c in checks]},
         ["t", "bound", "estimate", "se", "pass"], [list(c.csv_row()) for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VIOLATION


def cmd_partition(args) -> int:
    A = load_tensor(args.tensor)
    params = nets.UClassParams(args.M, args.N, args.r, A.order)
    U = _load_json(args.U) if args.U else nets.random_half_ball_set(A.dims[:-1], args.r, args.seed)
    try:
        rep = nets.partition_U(A, params, U, _cfg(args), args.seed, C_card=args.C)
    except PostconditionError as exc:
        emit(args, {"error": "postcondition", "clause": exc.clause, "details": exc.details},
             ["part", "shift_index", "members"], [])
        return EXIT_VIOLATION
    rows = [[n, p.shift_index + 1, " ".join(str(i + 1) for i in p.member_indices)]
            for n, p in enumerate(rep.parts, start=1)]
    report = rep.to_dict()
    for part in report["parts"]:
        part["shift_index"] += 1
        part["member_indices"] = [i + 1 for i in part["member_indices"]]
    emit(args, report, ["part", "shift_index", "members"], rows)
    return EXIT_OK


def cmd_fit_c(args) -> int:
    paths = ([args.tensor] if args.tensor else []) + list(args.tensors)
    if not paths:
        raise ValidationError("fit-c needs at least one tensor")
    cfg = _cfg(args)
    moment_data, tail_data, rows = [], [], []
    for path in paths:
        A = load_tensor(path)
        vals = [r.value for r in alphas(A, cfg)]
        for M in args.M:
            try:
                measured, source = oracle.wick_moment(A, M, args.budget), "wick"
            except CapacityError:
                measured = oracle.empirical_statistic(A, oracle.Statistic("moment", M),
                                                      args.samples, args.seed, cfg).estimate
                source = "mc"
            moment_data.append((vals, M, measured))
            rows.append([path, "moment", M, measured, source,
                         bounds.moment_bound_from_alphas(vals, M, 1.0)[0]])
        for x in args.x:
            st = oracle.empirical_statistic(A, oracle.Statistic("tail", x), args.samples, args.seed, cfg)
            tail_data.append((vals, x, st.estimate))
            rows.append([path, "tail", x, st.estimate, "mc", None])
    c_mom = bounds.fit_c_moments(moment_data)
    c_tail = bounds.fit_c_tail(tail_data) if tail_data else None
    report = {"C_star_moment": c_mom, "C_star_tail": c_tail,
              "members": [dict(zip(["tensor", "kind", "param", "measured", "source", "raw_factor"], r))
                          for r in rows]}
    emit(args, report, ["tensor", "kind", "param", "measured", "source", "raw_factor",
                        "C_star_moment", "C_star_tail"], [r + [c_mom, c_tail] for r in rows])
    return EXIT_OK


COMMANDS = {"norms": cmd_norms, "bound": cmd_bound, "verify": cmd_verify, "nets": cmd_nets,
            "partition": cmd_partition, "fit-c": cmd_fit_c}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except CapacityError as exc:
        print(f"chaosbounds: capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, OSError) as exc:
        print(f"chaosbounds: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
