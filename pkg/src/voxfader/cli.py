"""Command-line entry point: ``python -m voxfader <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import ConfigError, DataError, DimensionError, NumericError, UsageError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("voxfader")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxfader", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic corpus")
    p.add_argument("--config", required=True)

    p = sub.add_parser("pretrain", help="pretrain the gender discriminator")
    p.add_argument("--config", required=True)

    p = sub.add_parser("train", help="train the fader network")
    p.add_argument("--config", required=True)
    p.add_argument("--no-adversarial", action="store_true", help="drop the adversarial loss (ablation)")
    p.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")
    p.add_argument("--until-epoch", type=int, default=None, help="stop after this many epochs")

    p = sub.add_parser("eval", help="evaluate trained checkpoints")
    p.add_argument("--config", required=True)
    p.add_argument("--ckpt", required=True, help="run directory holding the checkpoints")

    p = sub.add_parser("report", help="summarize evaluation reports found below a directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True, help="output file; .json for JSON, Markdown otherwise")
    return parser


def _dispatch(args) -> None:
    if args.command == "report":
        pipeline.aggregate(args.in_dir, args.out)
        return
    cfg = load_config(args.config)
    if args.command == "gen-data":
        pipeline.gen_data(cfg)
    elif args.command == "pretrain":
        pipeline.pretrain(cfg)
    elif args.command == "train":
        if args.until_epoch is not None and args.until_epoch < 0:
            raise ConfigError("--until-epoch: must be >= 0")
        pipeline.train(cfg, adversarial=not args.no_adversarial, resume=args.resume, until_epoch=args.until_epoch)
    elif args.command == "eval":
        pipeline.evaluate(cfg, args.ckpt)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValidationError, DimensionError, UsageError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
