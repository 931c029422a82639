"""Command-line front end: gen-rand, screen, solve, dass, bench."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .bench import generate_rand, parse_config, run_experiment, spec_from_name
from .core import Dictionary, compute_lambda_max, make_instance, \
    primal_objective
from .fileio import (DEFAULT_BLOCK, StreamingColumns, read_dual_solution,
                     read_matrix, read_vector, write_matrix, write_vector)
from .screening import TestSpec, run_test
from .sequential import dass_solve
from .solver import SolverConfig, solve_lasso, solve_with_partition

TEST_CHOICES = ["st", "dt", "tht", "irdt", "strong", "ssr", "sis"]


def _add_instance_args(sub, ratio_required=True):
    sub.add_argument("--dict", required=True, dest="dict_path",
                     help="dictionary matrix file (CSV or binary)")
    sub.add_argument("--y", required=True, dest="y_path",
                     help="target vector file")
    sub.add_argument("--lambda-ratio", type=float,
                     required=ratio_required, dest="ratio",
                     help="lambda as a fraction of lambda_max, in (0, 1]")
    sub.add_argument("--kind", choices=["lasso", "nonneg"], default="lasso")


def _load_instance(args):
    dictionary = Dictionary(read_matrix(args.dict_path))
    y = read_vector(args.y_path)
    inst = make_instance(dictionary, y, ratio=args.ratio, kind=args.kind)
    return dictionary, inst


def _spec_from_args(args):
    spec = spec_from_name(args.test, s_iters=args.s_iters, gamma=args.gamma)
    if getattr(args, "dual_solution", None):
        lam0, th0 = read_dual_solution(args.dual_solution)
        spec = TestSpec(spec.kind, s_iters=spec.s_iters, gamma=spec.gamma,
                        dual_solution=(lam0, th0))
    return spec


def _write_flags(path, flags):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "rejected"])
        for i, v in enumerate(flags):
            wr.writerow([i, int(v)])


def cmd_gen_rand(args):
    dictionary, targets = generate_rand(args.p, args.n, args.seed)
    write_matrix(args.out, dictionary.dense())
    if args.targets > 0:
        ys = np.column_stack([next(targets) for _ in range(args.targets)])
        write_matrix(args.targets_out, ys)
    print(f"wrote {args.n}x{args.p} dictionary to {args.out}")


def cmd_screen(args):
    dictionary, inst = _load_instance(args)
    report = run_test(dictionary, inst, _spec_from_args(args))
    _write_flags(args.out, report.rejected)
    print(f"lambda={inst.lam:.6g} lambda_max={inst.lambda_max:.6g}")
    print(f"rejected {report.n_rejected}/{dictionary.p} "
          f"({report.partition.rejection_fraction():.1%}) "
          f"in {report.screen_seconds:.4g}s  safe={report.safe}")
    print(f"regions: {report.regions_used}")


def cmd_solve(args):
    dictionary, inst = _load_instance(args)
    cfg = SolverConfig(gap_tol=args.gap_tol)
    if args.screen:
        spec = spec_from_name(args.screen, s_iters=args.s_iters,
                              gamma=args.gamma)
        if args.dual_solution:
            lam0, th0 = read_dual_solution(args.dual_solution)
            spec = TestSpec(spec.kind, s_iters=spec.s_iters,
                            gamma=spec.gamma, dual_solution=(lam0, th0))
        report = run_test(dictionary, inst, spec)
        sol, _ = solve_with_partition(dictionary, inst,
                                      report.partition.selected, cfg)
        print(f"screened with {args.screen}: rejected "
              f"{report.n_rejected}/{dictionary.p} safe={report.safe}")
    else:
        sol = solve_lasso(dictionary, inst, cfg)
    if args.out:
        write_vector(args.out, sol.w)
    obj = primal_objective(dictionary, inst, sol.w)
    print(f"objective={obj:.12g}")
    print(f"gap={sol.gap:.6g} nonzeros={sol.support.size} "
          f"converged={sol.converged}")


def cmd_dass(args):
    if args.block_size:
        source = StreamingColumns(args.dict_path, block_size=args.block_size)
    else:
        source = Dictionary(read_matrix(args.dict_path))
    y = read_vector(args.y_path)
    lmax, _, _ = compute_lambda_max(source, y, args.kind)
    lambda_t = args.ratio * lmax
    cfg = SolverConfig(gap_tol=args.gap_tol)
    sol, trace = dass_solve(source, y, lambda_t, args.R, cfg, kind=args.kind)
    if args.out:
        write_vector(args.out, sol.w)
    if args.trace:
        trace.write_csv(args.trace)
    print(f"lambda_t={lambda_t:.6g} (ratio {args.ratio}) steps={trace.n_steps}")
    print(f"final survivors={trace.surviving[-1]}/{source.p} "
          f"gap={sol.gap:.6g} nonzeros={int(np.count_nonzero(sol.w))}")


def cmd_bench(args):
    cfg = parse_config(args.config)
    path = run_experiment(cfg)
    print(f"metrics written to {path}")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="lassoscreen",
        description="Safe dictionary screening for lasso problems")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-rand", help="generate a unit-norm uniform dataset")
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--targets", type=int, default=0,
                   help="also write this many target vectors")
    g.add_argument("--targets-out", default="targets.bin")
    g.set_defaults(func=cmd_gen_rand)

    s = sub.add_parser("screen", help="run one screening test")
    _add_instance_args(s)
    s.add_argument("--test", choices=TEST_CHOICES, required=True)
    s.add_argument("--dual-solution",
                   help="vector file: lambda0 then theta0 (for tht/dt/ssr)")
    s.add_argument("--s-iters", type=int, default=5)
    s.add_argument("--gamma", type=float, default=0.5)
    s.add_argument("--out", default="flags.csv")
    s.set_defaults(func=cmd_screen)

    v = sub.add_parser("solve", help="solve an instance, optionally screened")
    _add_instance_args(v)
    v.add_argument("--screen", choices=TEST_CHOICES)
    v.add_argument("--dual-solution")
    v.add_argument("--s-iters", type=int, default=5)
    v.add_argument("--gamma", type=float, default=0.5)
    v.add_argument("--gap-tol", type=float, default=1e-8)
    v.add_argument("--out", help="write the weight vector here")
    v.set_defaults(func=cmd_solve)

    d = sub.add_parser("dass", help="data-adaptive sequential screening")
    _add_instance_args(d)
    d.add_argument("--R", type=float, required=True,
                   help="dome diameter budget")
    d.add_argument("--block-size", type=int, default=0,
                   help=f"stream the dictionary file in feature blocks "
                        f"(binary format only; e.g. {DEFAULT_BLOCK})")
    d.add_argument("--gap-tol", type=float, default=1e-8)
    d.add_argument("--out")
    d.add_argument("--trace", help="write the per-step trace CSV here")
    d.set_defaults(func=cmd_dass)

    b = sub.add_parser("bench", help="run a benchmark config")
    b.add_argument("--config", required=True)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
