"""Batch figure generation from cthmc CSV outputs."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureJob
from .io import SchemaError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plotkit",
                                 description="figures from cthmc CSV outputs")
    sub = ap.add_subparsers(dest="command", required=True)

    th = sub.add_parser("trace-hist",
                        help="histogram + trace panels from samples CSVs")
    th.add_argument("files", nargs="+")
    th.add_argument("--out", required=True)
    th.add_argument("--component", type=int, default=0,
                    help="0-based position component (default: first)")
    th.add_argument("--reference", choices=("norm", "none"), default="norm")

    rm = sub.add_parser("rmse-curves", help="RMSE-vs-beta curves")
    rm.add_argument("file")
    rm.add_argument("--out", required=True)

    pr = sub.add_parser("precision-curves",
                        help="integrator error vs tolerance curves")
    pr.add_argument("file")
    pr.add_argument("--out", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "trace-hist":
            ref = None if args.reference == "none" else args.reference
            job = FigureJob("trace-hist", tuple(args.files), args.out,
                            component=args.component, reference=ref)
        elif args.command == "rmse-curves":
            job = FigureJob("rmse-curves", (args.file,), args.out)
        else:
            job = FigureJob("precision-curves", (args.file,), args.out)
        out = job.run()
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
