"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import dependence, estimation, model, transforms
from .counts_io import format_counts, parse_counts
from .errors import (
    ConcentricError,
    DataError,
    InconsistencyError,
    NumericalError,
)
from .simulation import DEFAULT_RHOS, run_simulation

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

MOMENT_KINDS = ("raw", "central", "loglinear", "linear", "leaf-linear", "leaf-loglinear")


class UsageError(ConcentricError):
    pass


def fmt(x) -> str:
    return f"{x:.12g}"


def _emit(text: str, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _spec(args) -> model.ModelSpec:
    if args.alpha is not None:
        return model.ModelSpec.from_alpha(args.Q, args.alpha)
    if args.rho is not None:
        return model.ModelSpec.from_rho(args.Q, args.rho)
    raise UsageError("one of --rho or --alpha is required")


def _add_model_args(parser, rho_required=True):
    parser.add_argument("--Q", type=int, required=True, help="number of leaves")
    group = parser.add_mutually_exclusive_group(required=rho_required)
    group.add_argument("--rho", type=float, help="leaf-root correlation in [0, 1)")
    group.add_argument("--alpha", type=float, help="odds parameter (1 + rho) / (1 - rho)")


def _levels(t: int, width: int) -> list[int]:
    return [(t >> q) & 1 for q in range(width)]


def _render_table(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def cmd_tabulate(args) -> str:
    spec = _spec(args)
    if args.marginal:
        pi = model.marginal_leaves(spec)
    else:
        pi = model.joint_vector_direct(spec)
    width = pi.p
    names = [f"a{q + 1}" for q in range(spec.Q)] + ([] if args.marginal else ["l"])

    extra_name, extra = None, None
    if args.integer:
        if spec.alpha == int(spec.alpha):
            ints = model.integer_vector(spec)
            if args.marginal:
                half = 1 << spec.Q
                ints = tuple(a + b for a, b in zip(ints[:half], ints[half:]))
            extra_name, extra = "count", list(ints)
        elif args.marginal:
            raise UsageError("--integer with --marginal needs an integer alpha")
        else:
            extra_name, extra = "exponent", [int(e) for e in model.integer_pattern(spec)]

    if args.format == "json":
        cells = []
        for t, prob in enumerate(pi.entries):
            entry = {"index": t, "levels": _levels(t, width), "probability": float(prob)}
            if extra is not None:
                entry[extra_name] = extra[t]
            cells.append(entry)
        return _json({
            "model": {"Q": spec.Q, "rho": spec.rho, "alpha": spec.alpha, "c_Q": spec.c_Q},
            "root_included": not args.marginal,
            "cells": cells,
        })
    header = names + ["probability"] + ([extra_name] if extra is not None else [])
    rows = []
    for t, prob in enumerate(pi.entries):
        row = _levels(t, width) + [fmt(prob)]
        if extra is not None:
            row.append(extra[t])
        rows.append(row)
    if args.format == "csv":
        lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
        return "\n".join(lines) + "\n"
    return _render_table(header, rows)


def cmd_moments(args) -> str:
    spec = _spec(args)
    if args.kind == "leaf-linear":
        vec = transforms.leaf_linear_interactions(spec)
    elif args.kind == "leaf-loglinear":
        vec = transforms.leaf_loglinear(spec)
    else:
        pi = model.joint_vector_kron(spec)
        kind = {"raw": "raw_moment", "central": "central_moment"}.get(args.kind, args.kind)
        vec = transforms.transform(pi, kind)
    pairs = vec.as_dict(drop_zeros=args.drop_zeros, atol=1e-12)
    if args.format == "json":
        return _json({"kind": vec.kind, "p": vec.p, "root_included": vec.root_included,
                      "entries": pairs})
    rows = [[label, fmt(value)] for label, value in pairs.items()]
    if args.format == "csv":
        return "subset,value\n" + "".join(f'"{l}",{v}\n' for l, v in rows)
    return _render_table(["subset", "value"], rows)


def _read_input(path) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def cmd_fit(args) -> str:
    counts = parse_counts(_read_input(args.input))
    mode = args.mode or ("observed" if counts.root_observed else "em")
    if mode == "observed" and not counts.root_observed:
        raise UsageError("mode 'observed' needs an 'l' column")
    if mode != "observed" and counts.root_observed:
        raise UsageError(f"mode {mode!r} fits leaves only; drop the 'l' column or use --mode observed")

    trace = None
    if mode == "observed":
        est = estimation.mle_observed(counts)
        rho, rho_sq, flags = est.rho, est.rho_sq, list(est.flags)
    elif mode == "mom":
        est = estimation.mom_estimate(counts)
        rho, rho_sq, flags = est.rho, est.rho_sq, list(est.flags)
    elif mode == "closed":
        est = estimation.closed_form_latent(counts)
        rho, rho_sq, flags = est.rho, est.rho_sq, list(est.flags)
    else:
        config = estimation.EMConfig(args.tolerance, args.max_iter, args.init)
        trace = estimation.em_fit(counts, config)
        rho = trace.final_rho
        rho_sq, flags = rho * rho, list(trace.flags)

    report = {
        "model": {
            "Q": counts.Q,
            "rho_hat": rho,
            "alpha_hat": model.rho_to_alpha(rho),
            "rho_sq_hat": rho_sq,
        },
        "measures": estimation.derived_measures(rho),
        "flags": flags,
        "mode": mode,
        "n": counts.n,
    }
    if trace is not None:
        report["trace"] = [
            {"m": s.m, "rho": s.rho, "alpha": s.alpha, "loglik": s.loglik}
            for s in trace.iterations
        ]
        report["converged"] = trace.converged
    return _json(report)


def cmd_simulate(args) -> str:
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    if any(not 0 <= r < 1 for r in args.rho):
        raise UsageError("every --rho must lie in [0, 1)")
    report = run_simulation(
        Q=args.Q,
        rhos=args.rho,
        ns=args.n,
        replicates=args.replicates,
        tolerances=args.tolerance,
        master_seed=args.seed,
        threads=args.threads,
        max_iterations=args.max_iter,
    )
    return _json(report.to_dict(include_replicates=args.per_replicate))


def cmd_reversal(args) -> str:
    if args.alpha is not None:
        alpha = args.alpha
    elif args.rho is not None:
        alpha = model.rho_to_alpha(args.rho)
    else:
        raise UsageError("one of --rho or --alpha is required")
    report = dependence.reversal_analysis(alpha, args.Q)
    if args.format == "json":
        return _json(report.as_dict())
    rows = [
        ("A2 on L | A1", "odds-ratio", report.forward_odds_ratio),
        ("A2 on L | A1", "chance difference", report.forward_chance_difference),
        ("A2 on L | A1", "relative chance", report.forward_relative_chance),
        ("L on A2 | A1=0", "odds-ratio", report.odds_ratio_given_miss),
        ("L on A2 | A1=1", "odds-ratio", report.odds_ratio_given_success),
        ("L on A2 | A1=0", "chance difference", report.chance_difference_given_miss),
        ("L on A2 | A1=1", "chance difference", report.chance_difference_given_success),
        ("L on A2 | A1=0", "relative chance", report.relative_chance_given_miss),
        ("L on A2 | A1=1", "relative chance", report.relative_chance_given_success),
        (f"Q={report.Q}, even split vs all miss", "relative chance", report.extreme_relative_chance),
        (f"Q={report.Q}, one leaf flipped, rest miss", "relative chance",
         report.single_leaf_relative_chance),
    ]
    return _render_table(
        ["dependence", "measure", "exact", "rounded"],
        [[d, m, fmt(v), f"{v:.2f}"] for d, m, v in rows],
    )


def cmd_plan(args) -> str:
    spec = _spec(args)
    n = model.plan_sample_size(spec)
    if args.format == "json":
        return _json({"n": n, "smallest_cell_probability": 1.0 / spec.c_Q})
    return f"n = {n}\nsmallest cell probability = {fmt(1.0 / spec.c_Q)}\n"


def cmd_sample(args) -> str:
    spec = _spec(args)
    return format_counts(model.sample(spec, args.n, args.seed, include_root=args.include_root))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="concentric",
        description="Concentric-ring binary distributions over star graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tabulate", help="joint or leaf-marginal probability table")
    _add_model_args(p)
    p.add_argument("--marginal", action="store_true", help="sum out the root")
    p.add_argument("--integer", action="store_true",
                   help="add exact integer cells (integer alpha) or alpha exponents")
    p.add_argument("--format", choices=("csv", "json", "table"), default="table")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("moments", help="moment and interaction vectors")
    _add_model_args(p)
    p.add_argument("--kind", choices=MOMENT_KINDS, default="linear")
    p.add_argument("--drop-zeros", action="store_true")
    p.add_argument("--format", choices=("csv", "json", "table"), default="table")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("fit", help="estimate rho from a count CSV")
    p.add_argument("input", help="count CSV path, or - for standard input")
    p.add_argument("--mode", choices=("observed", "mom", "closed", "em"), default=None,
                   help="default: observed when the root column is present, else em")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--init", type=float, default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="repeated sample-and-EM experiments")
    p.add_argument("--Q", type=int, default=4)
    p.add_argument("--rho", type=float, nargs="+", default=list(DEFAULT_RHOS))
    p.add_argument("--n", type=int, nargs="+", default=[300, 1000])
    p.add_argument("--replicates", type=int, default=500)
    p.add_argument("--tolerance", type=float, nargs="+", default=[1e-4, 1e-7])
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--per-replicate", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reversal", help="dependence measures before and after role reversal")
    p.add_argument("--Q", type=int, default=2)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--rho", type=float)
    group.add_argument("--alpha", type=float)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_reversal)

    p = sub.add_parser("plan", help="sample size at which the rarest cell expects one count")
    _add_model_args(p)
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sample", help="draw a count table")
    _add_model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-root", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
        _emit(text, args.output)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, InconsistencyError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConcentricError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot write {args.output}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
