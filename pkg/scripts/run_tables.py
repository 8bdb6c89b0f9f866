#!/usr/bin/env python3
"""Desk-scale reproduction of the benchmark tables.

Writes one CSV per experiment family into --outdir (default ./results):

  table_ell_sweep.csv       example1, iteration/accuracy robustness in ell
  table_heat2d.csv          example2, tensorized EKSM and RKSM over (n, ell)
  table_heat3d.csv          example2_1, tensorized EKSM over ell
  table_convdiff.csv        example3, EKSM and RKSM over viscosities
  table_convdiff3d.csv      example4, EKSM and RKSM

Iteration counts and errors are the meaningful columns; timings are
hardware-specific and only informative.
"""

import argparse
import pathlib
import sys

from evosylv.cli import RunConfig, emit_report, run


def ell_sweep(outdir):
    records = [run(RunConfig(preset="example1", n=256, ell=ell, tol=1e-10))
               for ell in (256, 1024, 4096)]
    print(emit_report(records, outdir / "table_ell_sweep.csv"))


def heat2d(outdir):
    records = []
    for n in (32, 64):
        for ell in (256, 1024, 4096):
            for method in ("eksm", "rksm"):
                records.append(run(RunConfig(preset="example2", n=n, ell=ell,
                                             method=method, tol=1e-6)))
    print(emit_report(records, outdir / "table_heat2d.csv"))


def heat3d(outdir):
    records = [run(RunConfig(preset="example2_1", n=8, ell=ell, tol=1e-6))
               for ell in (64, 256, 1024)]
    print(emit_report(records, outdir / "table_heat3d.csv"))


def convdiff(outdir):
    records = []
    for eps in (1.0, 0.1, 0.01):
        for method in ("eksm", "rksm"):
            records.append(run(RunConfig(preset="example3", n=64, ell=256,
                                         method=method, epsilon=eps,
                                         tol=1e-6, m_max=60)))
    print(emit_report(records, outdir / "table_convdiff.csv"))


def convdiff3d(outdir):
    records = [run(RunConfig(preset="example4", n=10, ell=64, method=m,
                             tol=1e-6, m_max=60))
               for m in ("eksm", "rksm")]
    print(emit_report(records, outdir / "table_convdiff3d.csv"))


FAMILIES = {
    "ell_sweep": ell_sweep,
    "heat2d": heat2d,
    "heat3d": heat3d,
    "convdiff": convdiff,
    "convdiff3d": convdiff3d,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--only", choices=sorted(FAMILIES), nargs="*")
    args = ap.parse_args(argv)
    outdir = pathlib.Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, fam in FAMILIES.items():
        if args.only and name not in args.only:
            continue
        print(f"--- {name} ---")
        fam(outdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
