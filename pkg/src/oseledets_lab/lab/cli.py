"""Command line entry point: ``lab <kind> --config PATH [--seed N] [--workers N] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError, LabError
from .config import KINDS, load_config
from .io import write_bundle
from .runner import CHECK_KINDS, run

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Run an experiment and write a result bundle.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", required=True, help="flat YAML config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default from config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, kind=args.kind, seed=args.seed, workers=args.workers, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        bundle = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK if cfg.kind in CHECK_KINDS else 1
    path = write_bundle(bundle, cfg, cfg.out)
    print(path)
    if cfg.kind in CHECK_KINDS and not bundle.passed:
        print(f"{cfg.kind}: check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
