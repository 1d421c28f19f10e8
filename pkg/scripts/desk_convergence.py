"""Convergence studies at desk scale (q=10, B=q^-4, n = 8 ... 64) for every method.

Writes one CSV/JSON/SVG triple per method into ``runs/desk/`` and prints the
observed orders from the last two levels. Takes a few minutes.

    python scripts/desk_convergence.py [--levels 8,16,32]
"""

import argparse
import logging
from pathlib import Path

from smectic_fem.cli import StudyConfig, run_study, write_outputs

METHODS = [("argyris", None), ("c0ip", 2), ("c0ip", 3), ("c0ip", 4), ("mixed", 1), ("mixed", 2)]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", default="8,16,32,64")
    p.add_argument("--out", default="runs/desk")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    levels = tuple(int(t) for t in args.levels.split(","))

    for method, k in METHODS:
        config = StudyConfig(method=method, k=k, q=10.0, B="qinv4", levels=levels, plot=True)
        result = run_study(config)
        write_outputs(result, str(Path(args.out) / config.tag()))
        orders = "  ".join(f"{name}={s['order']:.2f}" for name, s in result.slopes().items())
        print(f"{config.tag():9s} {orders}")


if __name__ == "__main__":
    main()
