"""Command-line front end.

Exit codes: 0 success, 1 configuration/validation error, 2 non-convergence
(or a converged result that fails verification).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import RunConfig, build_problem, load_config
from .core import solve_fixed_point
from .domain import DiskGrid, SignPattern, sup_norm
from .exceptions import BKError, ConfigError, DegenerateRetraction, NonConvergence, VanishingOperator
from .kernels import KernelId, green_values, kernel_matrix
from .verify import check_lower_bound_route, common_eigenvalue, estimate_inf_boundary, verify_solution

log = logging.getLogger("bkeigen")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2
VERIFY_TOL = 1e-6
SWEEP_COLUMNS = ["r1", "r2", "sign", "lambda1", "lambda2", "residual1", "residual2", "iterations", "converged"]


class _Out:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)


def _fmt(value, precision: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.{precision}g}"


def write_csv(path, header, rows, precision: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v, precision) for v in row])
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
    return text


def _csv_target(args, cfg: RunConfig):
    return args.out if args.out is not None else cfg.output.csv_path


def cmd_solve(cfg: RunConfig, args, out) -> int:
    problem = build_problem(cfg)
    sign = cfg.sign
    prec = cfg.output.precision
    try:
        res = solve_fixed_point(problem, sign, cfg.solver_options())
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    report = verify_solution(problem, res, VERIFY_TOL)
    out(f"problem   {cfg.problem.kind}  r1={_fmt(problem.r1, prec)}  r2={_fmt(problem.r2, prec)}  sign={sign}")
    out(f"lambda1   {_fmt(res.lambda1, prec)}")
    out(f"lambda2   {_fmt(res.lambda2, prec)}")
    out(f"norm_u    {_fmt(sup_norm(res.x0), prec)}")
    out(f"norm_v    {_fmt(sup_norm(res.y0), prec)}")
    out(f"residual1 {res.residual1:.3e}")
    out(f"residual2 {res.residual2:.3e}")
    out(f"iterations {res.iterations}  (theta={res.theta:g})")
    out("verified  " + ("yes" if report.passed else "NO: " + ", ".join(report.failures())))

    target = _csv_target(args, cfg)
    if target is not None:
        grid = problem.grid
        if isinstance(grid, DiskGrid):
            header = ["x", "y", "u", "v"]
            cols = [grid.nodes[:, 0], grid.nodes[:, 1]]
        else:
            header = ["t", "u", "v"]
            cols = [grid.nodes]
        rows = zip(*cols, res.x0.values, res.y0.values)
        write_csv(target, header, rows, prec)
    if not report.passed:
        print(f"error: verification failed: {', '.join(report.failures())}", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args, out) -> int:
    spec = cfg.hypothesis_spec()
    problem = build_problem(cfg)
    rep = check_lower_bound_route(problem, spec)
    prec = cfg.output.precision
    out(f"theorem          {rep.theorem}")
    out(f"bound1           {_fmt(rep.bound1, prec)}")
    if rep.g_lower_integral is not None:
        out(f"g_lower_integral {_fmt(rep.g_lower_integral, prec)}")
    out(f"bound2           {_fmt(rep.bound2, prec)}")
    out(f"positive         {_fmt(rep.positive, prec)}")
    out(f"domination1      {_fmt(rep.domination_ok1, prec)}")
    out(f"domination2      {_fmt(rep.domination_ok2, prec)}")
    if not rep.lower_nonnegative:
        out("warning: a lower-bound function takes negative values on the grid")
    if args.samples > 0:
        for comp in (1, 2):
            est = estimate_inf_boundary(problem, comp, args.samples, args.seed)
            out(f"sampled_min{comp}     {_fmt(est, prec)}  (upper probe, {args.samples} samples, seed {args.seed})")
    return EXIT_OK if rep.ok else EXIT_CONFIG


def sweep_rows(cfg: RunConfig) -> list[list]:
    r1s, r2s = cfg.lattice()
    signs = SignPattern.legal_patterns(*cfg.cones())
    opts = cfg.solver_options()
    rows = []
    for r1 in r1s:
        for r2 in r2s:
            problem = build_problem(cfg, float(r1), float(r2))
            for sign in signs:
                try:
                    res = solve_fixed_point(problem, sign, opts)
                except NonConvergence as exc:
                    res = exc.result
                except BKError as exc:
                    log.warning("cell r1=%g r2=%g sign=%s failed: %s", r1, r2, sign, exc)
                    rows.append([r1, r2, str(sign), np.nan, np.nan, np.nan, np.nan, 0, False])
                    continue
                rows.append(
                    [r1, r2, str(sign), res.lambda1, res.lambda2, res.residual1, res.residual2,
                     res.iterations, res.converged]
                )
    return rows


def cmd_sweep(cfg: RunConfig, args, out) -> int:
    rows = sweep_rows(cfg)
    target = _csv_target(args, cfg)
    write_csv(target if target is not None else "-", SWEEP_COLUMNS, rows, cfg.output.precision)
    failed = sum(1 for r in rows if not r[-1])
    if failed:
        print(f"warning: {failed} of {len(rows)} cells did not converge", file=sys.stderr)
    return EXIT_OK


def kernel_table_rows(cfg: RunConfig):
    grid = cfg.grid()
    if isinstance(grid, DiskGrid):
        # rotation invariance: one target per radius (angle 0) against every source node
        pts = grid.nodes
        for r in grid.radii:
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = green_values(r, 0.0, pts[:, 0], pts[:, 1])
            for (y1, y2), val in zip(pts, vals):
                if y1 == r and y2 == 0.0:
                    continue
                yield ["disk", r, 0.0, y1, y2, val]
        return
    t = grid.nodes
    for kernel, label in ((KernelId.K1_DIRICHLET, "k1"), (KernelId.K2_MIXED, "k2")):
        mat = kernel_matrix(kernel, t, t)
        for i, ti in enumerate(t):
            for j, sj in enumerate(t):
                yield [label, ti, sj, mat[i, j]]


def cmd_kernel_table(cfg: RunConfig, args, out) -> int:
    if cfg.problem.kind == "ode":
        header = ["kernel", "t", "s", "value"]
    else:
        header = ["kernel", "x1", "x2", "y1", "y2", "value"]
    target = _csv_target(args, cfg)
    write_csv(target if target is not None else "-", header, kernel_table_rows(cfg), cfg.output.precision)
    return EXIT_OK


def cmd_demo_remark(args, out) -> int:
    """Component-wise eigenvalues exist where a single common one does not."""
    x = (Fraction(1), Fraction(1))
    tx = (2 * x[0] + x[1], x[0] + 3 * x[1])
    lam = common_eigenvalue(x, tx)
    l1, l2 = x[0] / tx[0], x[1] / tx[1]
    res = (x[0] - l1 * tx[0], x[1] - l2 * tx[1])
    print("T(x, y) = (2x + y, x + 3y) on [0, 1]^2, r1 = r2 = 1")
    print(f"T(1, 1) = ({tx[0]}, {tx[1]})")
    print(f"common eigenvalue: {'none' if lam is None else lam}")
    print(f"component-wise pair: (lambda1, lambda2) = ({l1}, {l2})")
    print(f"residuals: ({res[0]}, {res[1]})")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--preset", help="built-in problem: ode-example or pde-example")
    common.add_argument("--out", help="CSV output path ('-' for stdout)")
    common.add_argument("--sign", help="override solver.sign ('++', '+-', '-+', '--')")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled probes")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--dump-config", type=Path, help="write the effective configuration here")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bkeigen", description="Component-wise eigenpairs of Hammerstein systems")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve for one eigenpair")
    v = sub.add_parser("verify", parents=[common], help="check the existence hypotheses")
    v.add_argument("--samples", type=int, default=200, help="random pairs for the sampled probe (0 = skip)")
    sub.add_parser("sweep", parents=[common], help="solve over an (r1, r2) lattice")
    sub.add_parser("kernel-table", parents=[common], help="dump kernel samples as CSV")
    sub.add_parser("demo-remark", parents=[common], help="scalar vs component-wise eigenvalues")
    return parser


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "kernel-table": cmd_kernel_table}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    out = _Out(args.quiet)
    if args.command == "demo-remark":
        return cmd_demo_remark(args, out)
    try:
        overrides = {"solver": {"sign": args.sign}} if args.sign else None
        cfg = load_config(args.config, args.preset, overrides)
        if args.dump_config is not None:
            args.dump_config.write_text(cfg.to_toml())
        return COMMANDS[args.command](cfg, args, out)
    except (NonConvergence, VanishingOperator, DegenerateRetraction) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (ConfigError, BKError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
