"""Command-line entry point.

Subcommands::

    qnnperf validate GRAPH
    qnnperf decorate --graph G --impl-config C [--out F] [--format json|csv]
                     [--figures DIR]
    qnnperf schedule --graph G --impl-config C --platform P [--deadline N]
                     [--out F] [--figures DIR] [--no-double-buffer]
    qnnperf sweep    --graph G --platform P --sweep S --out-dir DIR
                     [--deadline N] [--figures] [--pareto OBJ[,OBJ...]]

Exit codes: 0 success, 1 domain failure (invalid graph, illegal config,
untileable layer), 2 usage / I/O / document-parse failure. Output files are
written atomically (temp file in the target directory, then rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import sweep as sweepmod
from .costmodel import decorate, decorate_report
from .errors import GraphSyntaxError, QnnPerfError, SchemaError
from .graph import parse_graph, parse_graph_document, validate_graph
from .implconfig import bind_config, parse_impl_config
from .platform import Deadline, parse_platform
from .scheduler import refine_and_schedule

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _UsageFailure(f"cannot read {path}: {exc}") from exc


class _UsageFailure(Exception):
    pass


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        _write_atomic(Path(args.out), text)
    else:
        sys.stdout.write(text)


def _load_graph(args):
    return parse_graph(_read(args.graph))


def _load_bound(args, g):
    cfg = parse_impl_config(_read(args.impl_config))
    return bind_config(g, cfg)


def _load_platform(args):
    return parse_platform(_read(args.platform))


def _deadline(args) -> Deadline | None:
    return Deadline(args.deadline) if args.deadline is not None else None


def cmd_validate(args) -> int:
    try:
        g = parse_graph_document(_read(args.graph))
    except (GraphSyntaxError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    diags = validate_graph(g)
    for d in diags:
        print(f"{d.code} at {d.subject}: {d.message}")
    if diags:
        return DOMAIN_ERROR
    print(f"ok: {len(g.nodes)} nodes, {len(g.edges)} edges")
    return 0


def _decorate_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["id", "kind", "implementation", "macs", "macs_per_pixel", "bops",
            "input_bytes", "param_bytes", "output_bytes", "temp_bytes"]
    writer.writerow(cols)
    for node in report["nodes"]:
        writer.writerow([node[c] for c in cols])
    return buf.getvalue()


def cmd_decorate(args) -> int:
    g = _load_graph(args)
    dg = decorate(g, _load_bound(args, g))
    report = decorate_report(dg)
    if args.format == "csv":
        _emit(args, _decorate_csv(report))
    else:
        _emit(args, json.dumps(report, indent=2) + "\n")
    if args.figures:
        from .figures import render_decorate_figures
        for path in render_decorate_figures(report, Path(args.figures)):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _schedule_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    cols = ["layer", "num_tiles", "double_buffered", "compute_cycles",
            "dma_cycles", "total_cycles", "l1_peak_bytes", "l2_peak_bytes"]
    writer.writerow(cols)
    for layer in report["layers"]:
        writer.writerow([layer[c] for c in cols])
    return buf.getvalue()


def cmd_schedule(args) -> int:
    g = _load_graph(args)
    dg = decorate(g, _load_bound(args, g))
    platform = _load_platform(args)
    _, report = refine_and_schedule(dg, platform, _deadline(args),
                                    double_buffer=not args.no_double_buffer)
    doc = report.to_dict()
    _emit(args, json.dumps(doc, indent=2) + "\n")
    if args.out:
        _write_atomic(Path(args.out).with_suffix(".csv"), _schedule_csv(doc))
    if args.figures:
        from .figures import render_schedule_figures
        for path in render_schedule_figures(doc, Path(args.figures)):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    g = _load_graph(args)
    platform = _load_platform(args)
    spec_path = Path(args.sweep)
    try:
        spec = sweepmod.load_sweep_spec(_read(args.sweep), spec_path.parent,
                                        g, platform, _deadline(args))
    except (SchemaError, OSError) as exc:
        raise _UsageFailure(f"bad sweep spec {args.sweep}: {exc}") from exc
    rows = sweepmod.run_sweep(spec)
    out_dir = Path(args.out_dir)
    _write_atomic(out_dir / "sweep.csv", sweepmod.emit_report(rows, "csv"))
    _write_atomic(out_dir / "sweep.json", sweepmod.emit_report(rows, "json"))
    objectives = [o for o in (args.pareto or "").split(",") if o]
    if objectives:
        front = sweepmod.pareto_filter(rows, objectives)
        if front:
            _write_atomic(out_dir / "pareto.json",
                          sweepmod.emit_report(front, "json"))
        else:
            _write_atomic(out_dir / "pareto.json",
                          json.dumps({"format_version": 1, "rows": []},
                                     indent=2, sort_keys=True) + "\n")
    if args.figures:
        from .figures import render_sweep_figures
        for path in render_sweep_figures(rows, out_dir):
            print(f"wrote {path}", file=sys.stderr)
    feasible = sum(r.feasible for r in rows)
    print(f"{len(rows)} grid points, {feasible} feasible; reports in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnnperf",
        description="Static memory/latency analysis of quantized networks "
                    "on scratchpad-based accelerators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structurally check a graph file")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("decorate", help="per-node cost and memory report")
    p.add_argument("--graph", required=True)
    p.add_argument("--impl-config", required=True)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures")
    p.set_defaults(func=cmd_decorate)

    p = sub.add_parser("schedule", help="tile, schedule and bound latency")
    p.add_argument("--graph", required=True)
    p.add_argument("--impl-config", required=True)
    p.add_argument("--platform", required=True)
    p.add_argument("--deadline", type=int, help="latency budget in cycles")
    p.add_argument("--out", help="JSON report path; a .csv twin is "
                                 "written alongside")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures")
    p.add_argument("--no-double-buffer", action="store_true")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sweep", help="evaluate a hardware/variant grid")
    p.add_argument("--graph", required=True)
    p.add_argument("--platform", required=True)
    p.add_argument("--sweep", required=True, help="sweep spec JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--deadline", type=int)
    p.add_argument("--pareto", metavar="OBJ[,OBJ...]",
                   help="also write pareto.json for these objectives "
                        "(latency, memory, accuracy)")
    p.add_argument("--figures", action="store_true",
                   help="also render PNG figures into --out-dir")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except QnnPerfError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
