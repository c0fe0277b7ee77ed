"""spectral-bridge command-line interface.

    spectral-bridge <stage> --config <file> [--seed N] [--out DIR]

Stages: synthgen, stats, degrade, pretrain, finetune, reconstruct, evaluate,
ghg-train, ghg-eval, sweep, report. The degrade stage alternatively accepts
--input/--srf/--output for one-shot projection. Exit codes: 0 success,
2 validation/configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ValidationError
from .pipeline import STAGES, degrade_one


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-bridge",
                                     description="Spectral reconstruction pipeline")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", type=Path, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the stage seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        if stage == "degrade":
            p.add_argument("--input", type=Path, help="single cube to project")
            p.add_argument("--srf", type=Path, help="SRF CSV for --input mode")
            p.add_argument("--output", type=Path, help="projected cube path for --input mode")
    return parser


def run(argv: list[str]) -> int:
    args = build_parser().parse_args(argv)

    if args.stage == "degrade" and args.input is not None:
        if args.srf is None or args.output is None:
            print("degrade --input requires --srf and --output", file=sys.stderr)
            return 2
        degrade_one(args.input, args.srf, args.output)
        return 0

    if args.config is None:
        print(f"{args.stage} requires --config", file=sys.stderr)
        return 2
    if args.out is None:
        print(f"{args.stage} requires --out", file=sys.stderr)
        return 2
    cfg = load_config(args.config)
    STAGES[args.stage](cfg, args.out, args.seed)
    return 0


def main() -> None:
    try:
        code = run(sys.argv[1:])
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    except Exception as exc:  # runtime failure
        print(f"failure: {exc}", file=sys.stderr)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
