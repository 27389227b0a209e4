#!/usr/bin/env python3
"""Generate every figure dataset into one output root.

    python3 scripts/reproduce_figures.py --out runs --workers 4

Each run lands in ``<out>/<experiment>-<config hash>/`` with a manifest.
"""

import argparse
import logging
import time

import numpy as np

from lattice_drain.experiments import build_config, run_experiment

REFERENCE_LATTICES = {
    "chain": {"kind": "chain", "n": 25},
    "step": {"kind": "step-chain", "n": 25, "v": 2.0},
    "hofstadter": {"kind": "hofstadter", "nx": 5, "ny": 5, "flux": float(np.pi / 2)},
}

JOBS = (
    [("dissipation-spectrum", {"model": m}) for m in REFERENCE_LATTICES.values()]
    + [("gamma-sweep", {"model": m}) for m in REFERENCE_LATTICES.values()]
    + [("ring-analytics", {}),
       ("ring-analytics", {"model": {"kind": "ring", "n": 400, "flux": float(np.pi / 2)}}),
       ("eigenmode-correlations", {}),
       ("lightcone", {})]
)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for name, raw in JOBS:
        t0 = time.perf_counter()
        man = run_experiment(build_config(raw, experiment=name, output_dir=args.out),
                             workers=args.workers)
        logging.info("%-24s %-40s %3d files  %.1fs", name, man["model"]["label"],
                     len(man["files"]), time.perf_counter() - t0)


if __name__ == "__main__":
    main()
