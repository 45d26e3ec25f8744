"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 flow halted
by self-intersection.  Every command echoes its configuration (to stderr,
and to ``config.json`` when ``--out`` names a directory) before computing.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_SINGULAR = 0, 1, 2, 3


def _fmt(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return f"{x:.17e}"


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats in full-precision scientific notation and sorted-free key order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, str):
        import json
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _echo(args, extra: dict | None = None) -> dict:
    record = {"command": args.command}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "func"):
            continue
        record[key] = str(value) if isinstance(value, Path) else value
    if extra:
        record.update(extra)
    text = dumps(record, indent=0).replace("\n", " ")
    print(f"# config {text}", file=sys.stderr)
    out = getattr(args, "out", None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(dumps(record) + "\n")
    return record


def _write_report(args, name: str, report) -> None:
    text = dumps(report)
    print(text)
    if getattr(args, "out", None) is not None:
        (args.out / name).write_text(text + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_derive(args) -> int:
    from .recursion import build_table, dumps_json, format_text

    _echo(args)
    table = build_table(args.k)
    p = table[(args.k, args.s)]
    print(format_text(p) if args.format == "text" else dumps_json(p))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .geometry import GeometryError, oracle_compare, parse_shape, verify_prop1
    from .recursion import build_table

    im = parse_shape(args.shape)
    _echo(args)
    report = {"shape": str(im), "tol": args.tol}
    ok = True
    try:
        prop1 = verify_prop1(im, args.samples)
        report["prop1"] = prop1["max_abs_error"]
        ok &= all(v < args.tol for v in prop1["max_abs_error"].values())
        if args.k_max >= 3:
            ks = list(range(3, args.k_max + 1))
            comp = oracle_compare(im, build_table(args.k_max), ks, args.samples)
            report["recursion_vs_oracle"] = {str(k): v for k, v in comp["by_k"].items()}
            ok &= all(v["max_component_error"] < args.tol and v["max_norm_error"] < args.tol
                      for v in comp["by_k"].values())
    except GeometryError as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        ok = False
    report["passed"] = bool(ok)
    _write_report(args, "verify_report.json", report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scan(args) -> int:
    from .evaluator import inequality_scan
    from .recursion import build_table

    _echo(args)
    rep = inequality_scan(build_table(args.k), args.k, args.n, args.m, args.samples, args.seed)
    _write_report(args, "scan_report.json", rep.to_dict())
    return EXIT_OK if rep.min_ratio > 0 else EXIT_FAIL


def _initial(args):
    from .flow import CurveState

    state = CurveState.from_shape(args.shape, args.nodes)
    if args.perturb:
        state = state.perturbed(args.perturb, args.seed)
    return state


def cmd_flow(args) -> int:
    from .flow import FlowConfig, isoperimetric_deficit, run

    cfg = FlowConfig(k=args.k, eps=args.eps, nodes=args.nodes, stepper=args.stepper,
                     t_end=args.t_end, grad_tol=args.grad_tol, max_steps=args.max_steps,
                     snapshot_dt=args.snapshot_dt, seed=args.seed)
    _echo(args, {"flow_config": cfg.to_dict()})
    traj = run(_initial(args), cfg)
    traj.write_csv(args.out)
    last = traj.log[-1]
    summary = {
        "status": traj.status,
        "t": last[0],
        "energy": last[1],
        "length": last[2],
        "max_abs_curvature": last[3],
        "radius_fit": last[4],
        "isoperimetric_deficit": isoperimetric_deficit(traj.final.nodes),
        "snapshots": len(traj.snapshots),
        "log_rows": len(traj.log),
    }
    _write_report(args, "summary.json", summary)
    return EXIT_SINGULAR if traj.flagged else EXIT_OK


def cmd_mcf(args) -> int:
    from .flow import FlowConfig, mcf_compare
    from .geometry import parse_shape

    eps_list = args.eps_list
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise _Usage("--eps-list must be strictly decreasing")
    im = parse_shape(args.shape)
    configs = [FlowConfig(k=args.k, eps=e, nodes=args.nodes, stepper="explicit",
                          t_end=args.t_window, snapshot_dt=args.snapshot_dt, seed=args.seed)
               for e in eps_list]
    _echo(args, {"flow_configs": [c.to_dict() for c in configs]})
    radius = im.p["R"] if im.kind == "circle" else None
    report = mcf_compare(_initial(args), configs, args.t_window, circle_radius=radius
                         if not args.perturb else None, reference_nodes=args.reference_nodes)
    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "mcf_compare.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "deviation", "status", "t_reached"])
        for row in report["rows"]:
            w.writerow([f"{row['eps']:.17e}", f"{row['deviation']:.17e}", row["status"],
                        f"{row['t_reached']:.17e}"])
    _write_report(args, "mcf_report.json", report)
    if any(r["status"] == "self_intersection" for r in report["rows"]):
        return EXIT_SINGULAR
    return EXIT_OK if report["monotone"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

class _Usage(Exception):
    pass


def _ranged_int(lo: int, hi: int):
    def conv(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if not lo <= v <= hi:
            raise argparse.ArgumentTypeError(f"must lie in [{lo}, {hi}], got {v}")
        return v
    return conv


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list: {text!r}") from None
    if not vals or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("need a comma-separated list of positive numbers")
    return vals


def _shape(text: str) -> str:
    from .geometry import GeometryError, parse_shape
    try:
        parse_shape(text)
    except (GeometryError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="distjets", description=__doc__.splitlines()[0],
                                 allow_abbrev=False)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derive", help="print p^{k,s} from the recursion", allow_abbrev=False)
    p.add_argument("--k", type=_ranged_int(2, 8), required=True)
    p.add_argument("--s", type=_ranged_int(0, 8), required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("verify-identities", help="projection identities and recursion vs FD oracle",
                       allow_abbrev=False)
    p.add_argument("--shape", type=_shape, required=True)
    p.add_argument("--k-max", type=_ranged_int(2, 6), default=5)
    p.add_argument("--samples", type=_ranged_int(1, 10_000), default=8)
    p.add_argument("--tol", type=_positive_float, default=1e-4)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("norm-scan", help="lower-bound scan of |A^k|^2 / |B|^(2k-4)",
                       allow_abbrev=False)
    p.add_argument("--k", type=_ranged_int(3, 8), required=True)
    p.add_argument("--n", type=_ranged_int(1, 4), default=1)
    p.add_argument("--m", type=_ranged_int(1, 4), default=1)
    p.add_argument("--samples", type=_ranged_int(1, 10_000_000), default=10_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_scan)

    def flow_common(p, nodes):
        p.add_argument("--k", type=_ranged_int(3, 6), default=3)
        p.add_argument("--shape", type=_shape, required=True)
        p.add_argument("--nodes", type=_ranged_int(16, 4096), default=nodes)
        p.add_argument("--perturb", type=float, default=0.0,
                       help="amplitude of seeded radial Fourier noise added to the initial curve")
        p.add_argument("--snapshot-dt", type=_positive_float, default=0.01)
        p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("flow", help="run the gradient flow and write CSV logs", allow_abbrev=False)
    flow_common(p, 128)
    p.add_argument("--eps", type=_positive_float, default=1.0)
    p.add_argument("--t-end", type=_positive_float, default=math.inf)
    p.add_argument("--stepper", choices=("descent", "explicit"), default="descent")
    p.add_argument("--grad-tol", type=_positive_float, default=1e-6)
    p.add_argument("--max-steps", type=_ranged_int(1, 10**9), default=100_000)
    p.add_argument("--out", type=Path, default=Path("flow_out"))
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("mcf-compare", help="deviation from curve shortening as eps decreases",
                       allow_abbrev=False)
    flow_common(p, 32)
    p.add_argument("--eps-list", type=_float_list, required=True)
    p.add_argument("--t-window", type=_positive_float, default=0.4)
    p.add_argument("--reference-nodes", type=_ranged_int(16, 4096), default=None)
    p.add_argument("--out", type=Path, default=Path("mcf_out"))
    p.set_defaults(func=cmd_mcf)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "derive" and args.s > args.k:
        ap.error(f"--s must not exceed --k ({args.s} > {args.k})")
    if args.command in ("flow", "mcf-compare"):
        from .geometry import parse_shape
        im = parse_shape(args.shape)
        if im.n != 1 or im.dim != 2 or not im.periodic:
            ap.error(f"flows need a closed plane curve (circle or ellipse), got {args.shape}")
        if args.nodes < 4 * args.k:
            ap.error(f"--nodes must be at least 4k = {4 * args.k}")
    if args.command == "flow" and args.stepper == "explicit" and math.isinf(args.t_end):
        ap.error("--stepper explicit needs a finite --t-end")
    try:
        return args.func(args)
    except _Usage as exc:
        ap.error(str(exc))
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
