"""Command line entry point.

Exit codes: 0 success, 1 config error, 2 data error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import synthetic
from .config import ENV_PREFIX, load_config
from .errors import AsemError, ConfigError, DataError, StageError
from .pipeline import Pipeline, format_report, run_seeds

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STAGE = 0, 1, 2, 3

# subcommand -> last pipeline stage it runs
STAGE_COMMANDS = {
    "train-embeddings": "embeddings",
    "pseudo-label": "pseudo-label",
    "enhance-seeds": "enhance-seeds",
    "retrieve": "retrieve",
    "train": "train",
    "evaluate": "evaluate",
    "pipeline": "evaluate",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asem",
        description="Seed-word weak supervision for aspect category detection, term extraction and polarity.",
        epilog=f"Config keys can be overridden with {ENV_PREFIX}<SECTION>__<KEY> environment variables.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, stage in STAGE_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the pipeline up to the '{stage}' stage")
        p.add_argument("--config", "-c", required=True, help="INI config file")
        p.add_argument("--output-dir", help="override paths.output_dir")
        if name == "pipeline":
            p.add_argument("--seeds", help="comma-separated seeds; reports the mean over runs")
    gen = sub.add_parser("gen-synthetic", help="write the planted synthetic dataset and a config")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-in-domain", type=int, default=200)
    gen.add_argument("--n-bank", type=int, default=2000)
    gen.add_argument("--n-test", type=int, default=500)
    gen.add_argument("--gamma", type=float, default=40.0)
    return parser


def _run(args) -> int:
    if args.command == "gen-synthetic":
        cfg = synthetic.SyntheticConfig(args.n_in_domain, args.n_bank, args.n_test, seed=args.seed)
        out = synthetic.generate(args.out, cfg, gamma=args.gamma)
        print(f"wrote synthetic dataset to {out}")
        return EXIT_OK
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.paths.output_dir = str(Path(args.output_dir).resolve())
    cfg.validate()
    if args.command == "pipeline" and args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"--seeds must be comma-separated integers, got {args.seeds!r}") from None
        summary = run_seeds(cfg, seeds)
        print(json.dumps(summary["metrics"], indent=2, sort_keys=True))
        return EXIT_OK
    pipe = Pipeline(cfg)
    report = pipe.run(STAGE_COMMANDS[args.command])
    if report is not None:
        print(format_report(report), end="")
    else:
        stage = STAGE_COMMANDS[args.command]
        print(f"stage '{stage}' done: {pipe.out / stage / pipe.hashes[stage]}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, ConfigError):
            return EXIT_CONFIG
        return EXIT_DATA if isinstance(exc.cause, (DataError, OSError)) else EXIT_STAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AsemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
