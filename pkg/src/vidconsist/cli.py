"""Command line entry point: ``vidconsist run|stage|report``.

Exit codes: 0 success, 2 configuration error, 3 numeric abort, 1 other
stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, load_config
from .frames import read_video
from .pipeline import STAGES, StageError, run_pipeline, run_stage
from .report import compute_consistency
from .segmentation import load_mask

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vidconsist", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads for sampling (default 1)")
    p.add_argument("--dump-intermediates", action="store_true", help="also write fusion background samples")
    p.add_argument("--seed-override", type=int, default=None, help="replace the config's root seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run all stages")
    run.add_argument("config", type=Path)

    stage = sub.add_parser("stage", help="run one stage from persisted state")
    stage.add_argument("name", choices=STAGES)
    stage.add_argument("config", type=Path)

    rep = sub.add_parser("report", help="consistency report for a video directory")
    rep.add_argument("video_dir", type=Path)
    rep.add_argument("--mask", type=Path, default=None, help="mask file for fg/bg breakdown")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "report":
        try:
            video, manifest = read_video(args.video_dir)
            masks = load_mask(args.mask, (manifest["H"], manifest["W"])) if args.mask else None
            print(compute_consistency(video, masks).to_json())
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        return 0

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed_override is not None:
        cfg = replace(cfg, seed=args.seed_override)

    try:
        if args.command == "run":
            run_pipeline(cfg, args.threads, args.dump_intermediates)
        else:
            run_stage(args.name, cfg, args.threads, args.dump_intermediates)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc.cause, FloatingPointError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
