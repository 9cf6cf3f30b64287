"""Command line entry point: ``lipbandits {run,analyze,bound,dims}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .harness import IoError, analyze_dir, bound_report, dims_report, run_experiment

log = logging.getLogger("lipbandits")


def _emit(obj: dict, out: str | None, name: str) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
        log.info("wrote %s", path / name)
    sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipbandits", description=__doc__)
    p.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="simulate every (horizon, seed) pair").add_argument("config")
    sub.add_parser("analyze", help="refit exponents from a run directory").add_argument("dir")
    sub.add_parser("bound", help="integrals and k_T without simulating").add_argument("config")
    sub.add_parser("dims", help="estimate zooming and maximizer dimensions").add_argument(
        "config")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            out = run_experiment(load_config(args.config), args.out, args.workers,
                                 args.seed_offset)
            print(out)
        elif args.command == "analyze":
            _emit(analyze_dir(args.dir), args.out, "analysis.json")
        elif args.command == "bound":
            _emit(bound_report(load_config(args.config)), args.out, "bounds.json")
        else:
            _emit(dims_report(load_config(args.config)), args.out, "dims.json")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IoError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
