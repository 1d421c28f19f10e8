"""Errors against q at fixed n=64 for the mixed method (k=2, B=1, bump solution).

    python scripts/q_sweep.py [--qs 8,16,32] [--n 64] [--degree 2]
"""

import argparse
import logging
from pathlib import Path

from smectic_fem.cli import StudyConfig, sweep_q, to_csv, write_outputs


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--qs", default="8,16,32")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--out", default="runs/qsweep")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    qs = tuple(float(t) for t in args.qs.split(","))
    config = StudyConfig(method="mixed", k=args.degree, B=1.0, solution="bump", levels=(args.n,), plot=True)
    result = sweep_q(config, qs=qs)
    write_outputs(result, str(Path(args.out) / f"mixed{args.degree}_n{args.n}"))
    print(to_csv(result), end="")
    for name in result.reports[0].errors:
        vals = [r.errors[name] for r in result.reports]
        print(f"# {name}: max/min over q = {max(vals) / min(vals):.3f}")


if __name__ == "__main__":
    main()
