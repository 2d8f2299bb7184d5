"""Command line driver: ``hodgehx {mesh,solve,harmonic,convergence,export}``.

The exit status is 0 iff every solve converged.  ``HODGEHX_THREADS`` caps
the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext

from .experiments import ExperimentConfig, run_export, run_mesh, run_table
from .krylov import DEFAULT_SEED

log = logging.getLogger("hodgehx")


def _thread_limit():
    n = os.environ.get("HODGEHX_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface", choices=("torus", "s3"), default="torus")
    common.add_argument("--levels", type=int, default=3, help="number of mesh levels")
    common.add_argument("--first-level", type=int, default=None, help="coarsest level (default: torus 0, s3 1)")
    common.add_argument("--c", type=float, default=1.0, help="zeroth-order coefficient c")
    common.add_argument("--inner", choices=("direct", "amg", "pcg-amg"), default=None, help="scalar Poisson solver")
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--maxit", type=int, default=500)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hodgehx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh", parents=[common], help="write the mesh hierarchy and a quality table")
    p = sub.add_parser("solve", parents=[common], help="HX-preconditioned PCG table")
    p.add_argument("--problem", choices=("curl", "div"), default="curl")
    sub.add_parser("harmonic", parents=[common], help="harmonic field MINRES table")
    p = sub.add_parser("convergence", parents=[common], help="L2 error table on s3")
    p.add_argument("--family", choices=("N0", "RT0", "both"), default="both")
    p = sub.add_parser("export", parents=[common], help="mesh and VTK export of the finest level")
    p.add_argument("--problem", choices=("curl", "div", "harmonic", "none"), default="harmonic")
    return parser


def _config(args, problem: str, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        surface=args.surface,
        levels=args.levels,
        problem=problem,
        c=args.c,
        inner=args.inner,
        tol=args.tol,
        seed=args.seed,
        output_dir=args.out,
        first_level=args.first_level,
        maxit=args.maxit,
        **extra,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with _thread_limit():
            return _run(args)
    except ValueError as exc:
        print(f"hodgehx: error: {exc}", file=sys.stderr)
        return 2


def _run(args) -> int:
    cmd = args.command
    if cmd == "mesh":
        _, path = run_mesh(_config(args, "curl"))
        print(path)
        return 0
    if cmd == "export":
        problem = args.problem
        cfg = _config(args, "convergence" if problem == "none" else problem)
        for path in run_export(cfg):
            print(path)
        return 0
    if cmd == "solve":
        cfg = _config(args, args.problem)
    elif cmd == "harmonic":
        cfg = _config(args, "harmonic")
    else:
        fams = ("N0", "RT0") if args.family == "both" else (args.family,)
        cfg = _config(args, "convergence", families=fams)
    rows, text, path = run_table(cfg)
    sys.stdout.write(text)
    log.info("wrote %s", path)
    return 0 if all(r["converged"] for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
