"""Command-line entry point: ``qonnx2graph <in.onnx> <out.json>``.

Writes the native JSON graph to the output path and the conversion report
as JSON to standard output. Exit codes: 0 success, 1 conversion error
(unsupported operator, malformed model), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .convert import MalformedModel, UnsupportedOp, convert


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qonnx2graph",
        description="Convert a QONNX/ONNX model into the native JSON graph format.",
    )
    parser.add_argument("input", help="path to the .onnx model")
    parser.add_argument("output", help="path for the emitted JSON graph")
    parser.add_argument(
        "--skip-unsupported",
        action="store_true",
        help="drop unsupported single-input operators instead of aborting",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = convert(args.input, args.output,
                         skip_unsupported=args.skip_unsupported)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedOp as exc:
        if exc.report is not None:
            print(exc.report.to_json())
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MalformedModel, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.to_json())
    return 0


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
