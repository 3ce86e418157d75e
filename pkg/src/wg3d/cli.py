"""Command-line front end.

Exit codes: 0 success, 1 comparison mismatch or failed self-test,
2 solver failure, 3 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .analysis import NORM_NAMES, StudyReport, compare
from .mesh import HDef, parse_mesh_spec
from .problems import CASE_IDS, catalog, load_problem_file
from .quadrature import DEFAULT_ORDER
from .solver import ConvergenceError
from .study import SolverSettings, run_study
from .system import BoundaryMode, assemble, write_matrix_market

EXIT_OK, EXIT_MISMATCH, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("wg3d")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # bad flags are configuration errors, not argparse's default status 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", type=int, choices=CASE_IDS, help="catalog test case")
    src.add_argument("--problem", type=Path, help="JSON problem file with u, A, c expressions")
    p.add_argument("--mesh", required=True,
                   help='mesh spec, e.g. "uniform:4x4x4", "graded:3x4x5:stretch=1.0", "random:8:seed=42:amp=0.2"')
    p.add_argument("--rho", type=_positive_float, default=1.0, help="stabilization parameter (default 1)")
    p.add_argument("--h-def", choices=[h.value for h in HDef], default=HDef.MAX_EDGE.value,
                   help="global mesh size: longest element edge or longest diagonal (default max)")
    p.add_argument("--boundary", choices=[b.value for b in BoundaryMode], default="l2",
                   help="Dirichlet data: face means or perturbed face means (default l2)")
    p.add_argument("--quad-order", type=int, default=DEFAULT_ORDER, help="Gauss points per direction")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-12, help="relative residual target for CG")
    p.add_argument("--max-iter", type=int, default=None, help="CG iteration cap (default 20*sqrt(N)+200)")
    p.add_argument("--precond", choices=["jacobi", "none"], default="jacobi")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wg3d", description="Lowest-order simplified weak Galerkin solver for 3D elliptic problems.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve on a sequence of refined meshes and report error norms")
    _add_problem_args(run)
    _add_solver_args(run)
    run.add_argument("--levels", type=int, default=1, help="number of meshes in the study")
    run.add_argument("--refine", type=int, default=2, help="element-count factor between levels")
    run.add_argument("--format", choices=["csv", "table"], default="csv")
    run.add_argument("--output", "-o", type=Path, help="write the report here instead of stdout")
    run.add_argument("--dump-matrix", type=Path, metavar="PATH",
                     help="also write the first level's matrix in Matrix Market format")

    st = sub.add_parser("selftest", help="run the invariant battery")
    st.add_argument("--trials", type=int, default=1000, help="randomized trials per identity")
    st.add_argument("--seed", type=int, default=20240611)

    cmp_ = sub.add_parser("compare", help="compare a study CSV against a reference CSV")
    cmp_.add_argument("report", help="study CSV written by 'wg3d run'")
    cmp_.add_argument("reference", help="reference CSV path, or a shipped reference name such as table01")
    cmp_.add_argument("--rtol", type=float, default=0.02, help="relative tolerance for every column")
    cmp_.add_argument("--column-rtol", action="append", default=[], metavar="COL=TOL",
                      help="per-column override, repeatable")

    dm = sub.add_parser("dump-matrix", help="assemble one system and write it in Matrix Market format")
    _add_problem_args(dm)
    dm.add_argument("output", type=Path)
    sub.add_parser("references", help="list the shipped reference tables")
    return parser


def _limit_threads() -> None:
    n = os.environ.get("WG3D_THREADS")
    if not n:
        return
    try:
        count = int(n)
    except ValueError:
        raise ConfigError(f"WG3D_THREADS must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    threadpool_limits(count)


def _problem(args):
    if args.problem is not None:
        try:
            return load_problem_file(args.problem)
        except OSError as exc:
            raise ConfigError(f"cannot read problem file: {exc}") from None
    return catalog(args.case)


def shipped_references() -> dict[str, str]:
    root = resources.files("wg3d") / "references"
    return {p.name.removesuffix(".csv"): p.name for p in root.iterdir() if p.name.endswith(".csv")}


def read_reference(name: str) -> str:
    path = Path(name)
    if path.is_file():
        return path.read_text()
    refs = shipped_references()
    hits = [v for k, v in refs.items() if k == name or k.startswith(name + "_")]
    if len(hits) != 1:
        raise ConfigError(f"no reference file or unique shipped reference named {name!r}; "
                          f"known: {', '.join(sorted(refs))}")
    return (resources.files("wg3d") / "references" / hits[0]).read_text()


def _emit(report: StudyReport, fmt: str, output: Path | None) -> None:
    text = report.to_table() if fmt == "table" else report.to_csv()
    if output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        output.write_text(text)
    if fmt == "csv" and len(report.rows) > 1:
        for name, r in report.rates().items():
            log.info("rate %-9s last pair %.2f, least squares %.2f", name, r.pairwise[-1], r.lsq_slope)


def cmd_run(args) -> int:
    if args.levels < 1:
        raise ConfigError("--levels must be >= 1")
    if args.refine < 2:
        raise ConfigError("--refine must be an integer >= 2")
    problem = _problem(args)
    settings = SolverSettings(args.tol, args.max_iter, None if args.precond == "none" else args.precond)
    if args.dump_matrix is not None:
        mesh = parse_mesh_spec(args.mesh, h_def=args.h_def)
        write_matrix_market(assemble(mesh, problem, args.rho, mode=args.boundary, order=args.quad_order),
                            args.dump_matrix)
    partial = StudyReport()
    try:
        report = run_study(problem, args.mesh, levels=args.levels, refinement=args.refine, rho=args.rho,
                           h_def=args.h_def, boundary=args.boundary, order=args.quad_order, solver=settings,
                           on_row=partial.rows.append)
    except ConvergenceError as exc:
        print(f"wg3d: solver failure on level {len(partial.rows)}: {exc}", file=sys.stderr)
        if partial.rows:
            _emit(partial, args.format, args.output)
        return EXIT_SOLVER
    _emit(report, args.format, args.output)
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .checks import run_all

    results = run_all(trials=args.trials, seed=args.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_MISMATCH


def cmd_compare(args) -> int:
    tol: float | dict[str, float] = args.rtol
    if args.column_rtol:
        tol = {c: args.rtol for c in NORM_NAMES}
        for item in args.column_rtol:
            col, _, val = item.partition("=")
            if col not in NORM_NAMES or not val:
                raise ConfigError(f"bad --column-rtol {item!r}; expected one of {NORM_NAMES} as COL=TOL")
            tol[col] = float(val)
    try:
        report = Path(args.report).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read report: {exc}") from None
    result = compare(report, read_reference(args.reference), tol)
    print(result.summary())
    return EXIT_OK if result.passed else EXIT_MISMATCH


def cmd_dump_matrix(args) -> int:
    mesh = parse_mesh_spec(args.mesh, h_def=args.h_def)
    system = assemble(mesh, _problem(args), args.rho, mode=args.boundary, order=args.quad_order)
    write_matrix_market(system, args.output)
    print(f"wrote {system.n}x{system.n} matrix with {system.A.nnz} nonzeros to {args.output}")
    return EXIT_OK


def cmd_references(args) -> int:
    for name in sorted(shipped_references()):
        print(name)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "selftest": cmd_selftest, "compare": cmd_compare,
            "dump-matrix": cmd_dump_matrix, "references": cmd_references}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        _limit_threads()
        return COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"wg3d: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as exc:
        print(f"wg3d: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
