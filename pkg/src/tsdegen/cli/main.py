"""Command-line entry point: ``tsdegen <experiment> --config run.yaml --out runs/x``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from ..errors import CheckpointError, ConfigError, ContractError, NumericError
from .config import KINDS, ExperimentConfig
from .experiments import run_experiment
from .runner import RunDirectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("tsdegen.cli")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsdegen", description="Desk-scale attention degeneration experiments.")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="YAML experiment config (defaults to desk-scale settings)")
        p.add_argument("--out", type=Path, help="run directory (overrides the config's 'out')")
        p.add_argument("--seeds", type=_seeds, help="comma-separated seeds, e.g. 0,1,2")
        p.add_argument("--paper-scale", action="store_true", help="lift sample counts to the published sizes")
        p.add_argument("--workers", type=int, default=1, help="train independent cells in this many processes")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"config is for {cfg.kind!r}, not {args.kind!r}")
    else:
        cfg = ExperimentConfig(args.kind)
    if args.seeds:
        cfg.seeds = list(args.seeds)
    if args.out is not None:
        cfg.out = str(args.out)
    if cfg.out is None:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    return cfg


def _attach_log(path: Path) -> logging.Handler:
    handler = logging.FileHandler(path, mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(name)s %(message)s"))
    root = logging.getLogger("tsdegen")
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    return handler


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        run_dir = RunDirectory(cfg.out)
    except (ConfigError, ContractError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = _attach_log(run_dir.log_path)
    t0 = time.perf_counter()
    try:
        run_experiment(cfg, run_dir, workers=args.workers, paper_scale=args.paper_scale)
    except (ConfigError, ContractError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        log.info("wall time %.1fs", time.perf_counter() - t0)
        logging.getLogger("tsdegen").removeHandler(handler)
        handler.close()
    print(run_dir.summary_path.read_text(), end="")
    print(f"report: {run_dir.report_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
