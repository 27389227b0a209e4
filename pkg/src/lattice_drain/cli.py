"""Command line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import InputError, NumericError
from .experiments import EXPERIMENTS, build_config, load_config, run_experiment

log = logging.getLogger("lattice_drain")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lattice-drain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=f"run the {name} experiment")
        s.add_argument("--config", help="YAML/JSON config file (a manifest.json also works)")
        s.add_argument("--out", help="output root directory (default: runs)")
        s.add_argument("--workers", type=int, default=1, help="worker threads for gamma sweeps")
        s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, dotted keys allowed (model.n=50)")
        s.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        kw = dict(experiment=args.experiment, overrides=args.override, output_dir=args.out)
        cfg = load_config(args.config, **kw) if args.config else build_config(None, **kw)
        if args.workers < 1:
            raise InputError("--workers must be at least 1")
        manifest = run_experiment(cfg, workers=args.workers)
    except InputError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    log.info("wrote %d files to %s", len(manifest["files"]), manifest["run_dir"])
    if not args.quiet:
        json.dump({"run_dir": manifest["run_dir"], "files": manifest["files"]}, sys.stdout, indent=1)
        sys.stdout.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
