#!/usr/bin/env python3
"""Emit the convergence-order data: error vs h and error vs tau.

Writes plain (refinement, error) CSVs that any plotting tool can consume:

  results/space_order.csv             second-order space slope
  results/time_order_s{1,2,3}.csv     BDF order-s time slopes

The time sweeps supply the exact extra initial values from the closed-form
solution, so the full order of the multistep scheme is visible.
"""

import argparse
import pathlib
import sys

from evosylv.cli import RunConfig, convergence_study, emit_plot_data


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--n-time", type=int, default=8193,
                    help="fixed space resolution for the time sweeps")
    args = ap.parse_args(argv)
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    base = RunConfig(preset="example1", s=3, ell=256, tol=1e-12)
    _, pairs, slope = convergence_study(base, "space", points=[33, 65, 129, 257])
    emit_plot_data(pairs, outdir / "space_order.csv")
    print(f"space slope: {slope:.3f}")

    for s in (1, 2, 3):
        base = RunConfig(preset="example1", n=args.n_time, s=s, tol=1e-12)
        _, pairs, slope = convergence_study(base, "time", points=[8, 16, 32, 64])
        emit_plot_data(pairs, outdir / f"time_order_s{s}.csv")
        print(f"time slope (s={s}): {slope:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
