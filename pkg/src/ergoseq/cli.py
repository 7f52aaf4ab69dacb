"""Command line front end.

Subcommands: suite (randomized falsification suites), demo (the divergence
demonstration), certify (matrix certification), average (one averaging run).
Exit codes: 0 all pass / converged, 1 at least one failure, 2 usage or
input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .averaging import run_averaging
from .operators import (
    NotContraction,
    PermutationOperator,
    ShiftOperator,
    certify_ds,
    identity,
    random_ds,
)
from .sequences import Tail, TruncatedSequence, basis_vector


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _read_config_file(path: str) -> dict:
    """Flat key=value file mirroring the suite flags; '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


_INT_KEYS = {"seed", "trials", "dim", "horizon", "window"}
_FLOAT_KEYS = {"tol"}
_LIST_KEYS = {"p", "alpha"}


def _coerce_config(raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key in _INT_KEYS:
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        elif key in _LIST_KEYS:
            out[key] = _parse_floats(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    return out


def parse_operator(spec: str):
    """Mini-language for --op: shift:left|right, identity:M, perm:2,1,...,
    matrix:FILE.json, random:dim,density,seed[,signed]."""
    kind, _, rest = spec.partition(":")
    if kind == "shift":
        return ShiftOperator(rest or "left")
    if kind == "identity":
        return identity(int(rest))
    if kind == "perm":
        return PermutationOperator([int(tok) for tok in rest.split(",")])
    if kind == "matrix":
        return _certify_file(rest, 0.0)
    if kind == "random":
        parts = rest.split(",")
        if len(parts) < 3:
            raise ValueError("random operator spec needs dim,density,seed")
        dim, density, seed = int(parts[0]), float(parts[1]), int(parts[2])
        sign = "signed" if "signed" in parts[3:] else "nonnegative"
        return random_ds(dim, density, sign, seed)
    raise ValueError(f"unknown operator spec {spec!r}")


def parse_sequence(spec: str) -> TruncatedSequence:
    """Mini-language for --x: e:K, values:a,b,c, const:c, block:LEN."""
    kind, _, rest = spec.partition(":")
    if kind == "e":
        return basis_vector(int(rest))
    if kind == "values":
        return TruncatedSequence(_parse_floats(rest))
    if kind == "const":
        return TruncatedSequence((), Tail.constant(float(rest)))
    if kind == "block":
        return TruncatedSequence.from_array(harness.block_sequence_prefix(int(rest)))
    raise ValueError(f"unknown sequence spec {spec!r}")


def _certify_file(path: str, tolerance: float):
    data = json.loads(Path(path).read_text())
    if "entries" in data:
        dim = int(data["dim"])
        arr = np.zeros((dim, dim))
        for r, c, v in data["entries"]:
            arr[int(r) - 1, int(c) - 1] = float(v)
    elif "matrix" in data:
        arr = np.asarray(data["matrix"], dtype=float)
    else:
        raise ValueError("matrix file needs an 'entries' or 'matrix' field")
    return certify_ds(arr, tolerance)


def _write_out(path: str | None, body: dict) -> None:
    if path:
        Path(path).write_bytes(harness.report_json_bytes(body))


def _cmd_suite(args) -> int:
    overrides = {}
    if args.config:
        overrides.update(_coerce_config(_read_config_file(args.config)))
    for key, attr in (
        ("seed", "seed"), ("trials", "trials"), ("dim", "dim"),
        ("horizon", "horizon"), ("tol", "tol"), ("window", "window"),
        ("p", "p"), ("alpha", "alpha"),
    ):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    mapped = {
        "seed": overrides.get("seed"),
        "trials": overrides.get("trials"),
        "dim": overrides.get("dim"),
        "horizon": overrides.get("horizon"),
        "tol": overrides.get("tol"),
        "window": overrides.get("window"),
        "p_values": overrides.get("p"),
        "alpha_values": overrides.get("alpha"),
    }
    if args.name == "all":
        body = harness.run_all(**mapped)
        fail = body["aggregate"]["fail"]
        for name, sub in body["suites"].items():
            agg = sub["aggregate"]
            print(f"suite {name}: {agg['pass']}/{agg['pass'] + agg['fail']} trials passed")
        trace = None
    else:
        report = harness.run_suite(harness.make_config(args.name, **mapped))
        body = report.to_dict()
        agg = report.aggregate
        fail = agg["fail"]
        extra = ""
        if agg["max_ratio"] is not None:
            extra += f", max ratio {agg['max_ratio']:.4g}"
        if agg["worst_residual"] is not None:
            extra += f", worst residual {agg['worst_residual']:.4g}"
        print(f"suite {args.name}: {agg['pass']}/{agg['pass'] + agg['fail']} trials passed{extra}")
        trace = report.trace
    _write_out(args.out, body)
    if args.trace:
        if trace:
            harness.write_trace_csv(trace, args.trace)
        else:
            print("no trace rows for this invocation", file=sys.stderr)
    return 0 if fail == 0 else 1


def _cmd_demo(args) -> int:
    result = harness.demo_counterexample(args.horizon, c0_contrast=args.c0_contrast)
    tag = "c0 contrast" if args.c0_contrast else "block sequence"
    print(f"divergence demo ({tag}), horizon {args.horizon}:")
    print(f"  coordinate {result.coord} final-octave max {result.limsup_est:.6f}")
    print(f"  coordinate {result.coord} final-octave min {result.liminf_est:.6f}")
    print(f"  gap {result.gap:.6f}")
    _write_out(args.out, result.to_dict())
    if args.trace:
        harness.write_trace_csv(result.trace, args.trace)
    return 0


def _cmd_certify(args) -> int:
    try:
        op = _certify_file(args.matrix, args.tolerance)
    except NotContraction as exc:
        print(f"rejected: {exc}")
        return 1
    print(
        f"certified: dim {op.dim}, max absolute row sum {op.cert.row_norm!r}, "
        f"max absolute column sum {op.cert.col_norm!r}"
    )
    return 0


def _cmd_average(args) -> int:
    T = parse_operator(args.op)
    x = parse_sequence(args.x)
    report = run_averaging(T, x, args.horizon, args.tol, args.window,
                           collect_checkpoints=bool(args.trace))
    head = list(report.limit_estimate.values[:8])
    status = "converged" if report.converged else "did not converge"
    print(f"{status} at n={report.n_final} (tolerance {report.tolerance:g})")
    print(f"limit estimate head: {head}")
    if report.residual_trace:
        last = report.residual_trace[-1]
        print(f"last checkpoint n={last.n}, residual={last.residual}, "
              f"max coord change={last.max_coord_change:g}")
    _write_out(args.out, report.to_dict())
    if args.trace:
        rows = []
        for n, avg in report.checkpoint_averages:
            res = next((r.residual for r in report.residual_trace if r.n == n), None)
            for s, value in enumerate(avg.values, start=1):
                rows.append((n, res, s, value))
        harness.write_trace_csv(rows, args.trace)
    return 0 if report.converged else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergoseq",
        description="Dunford-Schwartz averaging toolkit: certified contractions, "
                    "Cesaro averages, maximal bounds, and falsification suites.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("suite", help="run a randomized suite")
    ps.add_argument("name", choices=list(harness.SUITE_NAMES) + ["all"])
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--trials", type=int, default=None)
    ps.add_argument("--dim", type=int, default=None)
    ps.add_argument("--horizon", type=int, default=None)
    ps.add_argument("--tol", type=float, default=None)
    ps.add_argument("--window", type=int, default=None)
    ps.add_argument("--p", type=_parse_floats, default=None,
                    help="comma-separated exponents, e.g. 1,2,3")
    ps.add_argument("--alpha", type=_parse_floats, default=None,
                    help="comma-separated thresholds, e.g. 0.1,0.25")
    ps.add_argument("--config", default=None,
                    help="key=value file; explicit flags take precedence")
    ps.add_argument("--out", default=None, help="write the JSON report here")
    ps.add_argument("--trace", default=None, help="write a CSV trace here")
    ps.set_defaults(fn=_cmd_suite)

    pd = sub.add_parser("demo", help="run a demonstration")
    pd.add_argument("which", choices=["counterexample"])
    pd.add_argument("--horizon", type=int, default=2 ** 20)
    pd.add_argument("--c0-contrast", action="store_true",
                    help="replace the block sequence by a vanishing input")
    pd.add_argument("--out", default=None)
    pd.add_argument("--trace", default=None)
    pd.set_defaults(fn=_cmd_demo)

    pc = sub.add_parser("certify", help="certify a matrix as a contraction")
    pc.add_argument("--matrix", required=True, help="JSON file with entries or matrix")
    pc.add_argument("--tolerance", type=float, default=0.0)
    pc.set_defaults(fn=_cmd_certify)

    pa = sub.add_parser("average", help="run one averaging experiment")
    pa.add_argument("--op", required=True, help="operator spec, e.g. shift:left")
    pa.add_argument("--x", required=True, help="sequence spec, e.g. e:1")
    pa.add_argument("--horizon", type=int, required=True)
    pa.add_argument("--tol", type=float, default=1e-8)
    pa.add_argument("--window", type=int, default=3)
    pa.add_argument("--out", default=None)
    pa.add_argument("--trace", default=None)
    pa.set_defaults(fn=_cmd_average)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
