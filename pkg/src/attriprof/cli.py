"""Command-line interface.

Subcommands: extract, reduce, classify, eval, info.
Exit codes: 0 success, 1 validation/config/format error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import apply_overrides, load_config, preset_config
from .errors import FormatError, ValidationError
from .metrics import format_metrics
from .pipeline import cmd_classify, cmd_eval, cmd_extract, cmd_info, cmd_reduce


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="pipeline config file (sections + key=value)")
    p.add_argument("--preset", help="built-in preset name (reykjavik, pavia)")
    p.add_argument("--image", help="override input.image")
    p.add_argument("--train-labels", help="override input.train_labels")
    p.add_argument("--test-labels", help="override input.test_labels")
    p.add_argument("--out-dir", help="override output.dir")
    p.add_argument("--seed", type=int, help="override classifier.seed")
    p.add_argument("--force", action="store_true", help="ignore cached outputs")


def _resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        raise ValidationError("give --config PATH or --preset NAME")
    if args.preset and args.config:
        raise ValidationError("--config and --preset are mutually exclusive")
    return apply_overrides(
        cfg,
        image=args.image,
        train_labels=args.train_labels,
        test_labels=args.test_labels,
        out_dir=args.out_dir,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="attriprof",
        description="Attribute profiles on component/partition trees: "
        "feature extraction and supervised classification for rasters.",
    )
    ap.add_argument("--threads", type=int, default=1, help="worker threads for filtering")
    ap.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build the feature stack")
    _add_config_args(p)

    p = sub.add_parser("reduce", help="PCA-reduce a multiband image")
    _add_config_args(p)

    p = sub.add_parser("classify", help="train, predict, and evaluate")
    _add_config_args(p)

    p = sub.add_parser("eval", help="evaluate a predicted map against truth labels")
    p.add_argument("predicted", help="predicted class map file")
    p.add_argument("truth", help="truth label file")
    p.add_argument("--csv", help="also write metrics CSV here")

    p = sub.add_parser("info", help="describe a raster/stack/label file")
    p.add_argument("path")

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    stage = args.command
    try:
        if stage == "extract":
            cfg = _resolve_config(args)
            path = cmd_extract(cfg, threads=args.threads, force=args.force)
            print(path)
        elif stage == "reduce":
            cfg = _resolve_config(args)
            path = cmd_reduce(cfg, force=args.force)
            print(path)
        elif stage == "classify":
            cfg = _resolve_config(args)
            map_path, metrics_path = cmd_classify(cfg, force=args.force)
            print(map_path)
            print(metrics_path)
        elif stage == "eval":
            m = cmd_eval(args.predicted, args.truth, out_csv=args.csv)
            print(format_metrics(m), end="")
        elif stage == "info":
            print(cmd_info(args.path), end="")
        return 0
    except (ValidationError, FormatError, FileNotFoundError) as exc:
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error [{stage}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
