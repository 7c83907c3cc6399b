"""
Command-line entry point: `mpclo <command> [flags] <file>`.

stdout carries the machine-readable answer, one `key=value` group per line;
logs go to stderr and to config.LOG_FILE.
"""
import argparse
import logging
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import config
from . import problem_file
from . import report
from .data_models import AnalysisOptions, RunResult, SolverOptions
from .errors import MpcloError, ValidationError, VerificationFailure, WindowOutsideTheta
from .mappings import directional_derivative, gradient, map_eval, map_membership, normalize_side, theta_membership
from .model import assemble, ensure_valid, validate_instance
from .partition import decompose, verify_decomposition, verify_samples
from .solver import require_optimal, solve

logger = logging.getLogger(__name__)

FAMILY_FLAGS = {
    'primal': 'Primal',
    'dual': 'Dual',
    'nsdual-p': 'NsDualOfPrimal',
    'nsdual-d': 'NsDualOfDual',
}
# Options whose values may start with '-' (negative numbers, windows like -3:3)
_VALUE_OPTIONS = ('--at', '--window', '--direction', '--candidate')


def setup_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else config.LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(config.LOG_FILE),
            logging.StreamHandler(sys.stderr)
        ],
        force=True
    )


# --- Argument parsing ---

def parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(',')], dtype=float)
    except ValueError:
        raise ValidationError(f"Cannot read vector {text!r}; expected comma-separated numbers", check="argument")


def parse_window(text: str):
    """'a:b' or 'a:b,c:d' to ((a, b), ...)."""
    window = []
    for axis in text.split(','):
        try:
            lo, hi = (float(x) for x in axis.split(':'))
        except ValueError:
            raise ValidationError(f"Cannot read window axis {axis!r}; expected a:b", check="window")
        window.append((lo, hi))
    return tuple(window)


def parse_grid(text: str):
    try:
        return tuple(int(n) for n in text.split(','))
    except ValueError:
        raise ValidationError(f"Cannot read grid {text!r}; expected N or N,M", check="grid")


def _join_values(argv: Sequence[str]) -> List[str]:
    """`--at -1,2` to `--at=-1,2` so argparse does not read the value as an option."""
    joined, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTIONS and i + 1 < len(argv):
            joined.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            joined.append(argv[i])
            i += 1
    return joined


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--tol", type=float, default=None,
                        help="Mapping and verification tolerance (solver tolerances are tightened to match)")
    shared.add_argument("--jobs", type=int, default=config.JOBS, help="Worker processes for grid sweeps")
    shared.add_argument("--seed", type=int, default=config.SEED, help="Seed for randomized checks")
    shared.add_argument("--gram-mode", choices=['correct', 'substitute'], default=config.GRAM_MODE)
    shared.add_argument("--csv", type=str, default="", help="Write a CSV table to PATH")
    shared.add_argument("--svg", type=str, default="", help="Write an SVG region map to PATH")
    shared.add_argument("--verbose", action="store_true", help="Log at DEBUG level")

    parser = argparse.ArgumentParser(prog="mpclo", description="Multiparametric conic linear optimization analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[shared], help="Check the structural assumptions of an instance")
    p.add_argument("problem")

    p = sub.add_parser("solve", parents=[shared], help="Solve one problem family at one parameter")
    p.add_argument("problem")
    p.add_argument("--family", choices=list(FAMILY_FLAGS), default='primal')
    p.add_argument("--at", type=str, required=True)

    p = sub.add_parser("map", parents=[shared], help="Evaluate Phi(u) or Psi(v)")
    p.add_argument("problem")
    p.add_argument("--side", type=str, default='dual')
    p.add_argument("--at", type=str, required=True)

    p = sub.add_parser("member", parents=[shared], help="Theta membership, or map membership with --candidate")
    p.add_argument("problem")
    p.add_argument("--side", type=str, default='dual')
    p.add_argument("--at", type=str, required=True)
    p.add_argument("--candidate", type=str, default=None)

    p = sub.add_parser("derivative", parents=[shared], help="Directional derivative of the optimal value")
    p.add_argument("problem")
    p.add_argument("--side", type=str, default='dual')
    p.add_argument("--at", type=str, required=True)
    p.add_argument("--direction", type=str, required=True)

    p = sub.add_parser("partition", parents=[shared], help="Decompose a window into invariancy regions")
    p.add_argument("problem")
    p.add_argument("--side", type=str, default='dual')
    p.add_argument("--window", type=str, required=True)
    p.add_argument("--grid", type=str, default="61")
    p.add_argument("--table", type=str, default="", help="Write the map pairing table (r = 1) to PATH")
    p.add_argument("--save", type=str, default="", help="Save the decomposition as JSON for `report`")

    p = sub.add_parser("report", parents=[shared], help="Re-render saved partition results")
    p.add_argument("results")
    p.add_argument("--table", type=str, default="", help="Write the map pairing table (needs --problem)")
    p.add_argument("--problem", type=str, default="", help="Problem file the results were computed from")

    p = sub.add_parser("verify", parents=[shared], help="Sampled duality and mapping identity checks")
    p.add_argument("problem")
    p.add_argument("--samples", type=int, default=20)
    return parser


def analysis_options(args) -> AnalysisOptions:
    if args.tol is None:
        return AnalysisOptions(jobs=args.jobs, seed=args.seed, gram_mode=args.gram_mode)
    solver_tol = min(config.FEAS_TOL, args.tol * 1e-3)
    return AnalysisOptions(solver=SolverOptions(feas_tol=solver_tol, gap_tol=solver_tol),
                           set_tol=args.tol, mem_tol=args.tol, verify_tol=args.tol,
                           jobs=args.jobs, seed=args.seed, gram_mode=args.gram_mode)


def _load(path: str):
    instance = problem_file.load(path)
    return instance, problem_file.digest(instance)


def _gram_text(gram: np.ndarray) -> str:
    return "[" + ",".join("[" + ",".join(report.fmt(float(x)) for x in row) + "]" for row in gram) + "]"


# --- Commands ---

def cmd_validate(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    result = validate_instance(instance)
    print(f"passed={str(result.passed).lower()} rank_sum={result.rank_sum} q={result.q}")
    for name, residual in result.residuals.items():
        print(f"{name}={report.fmt(residual)}")
    print(f"assumption2_exact={str(result.assumption2_exact).lower()} gram={_gram_text(result.gram)}")
    if not result.passed:
        ensure_valid(instance)
    return RunResult(command='validate', digest=digest, summary={'passed': result.passed})


def cmd_solve(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    family = FAMILY_FLAGS[args.family]
    result = require_optimal(solve(assemble(instance, family, parse_vector(args.at)), opts.solver), family)
    print(f"status={result.status.lower()} objective={report.fmt_fixed(result.objective)}")
    if result.optimal:
        print(f"x={report.fmt_vector(result.x)}")
        print(f"gap={report.fmt(result.gap)} iterations={result.iterations}")
    return RunResult(command='solve', digest=digest, summary={'status': result.status})


def cmd_map(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    sample = map_eval(instance, args.side, parse_vector(args.at), opts)
    if sample.status == 'Undefined':
        print("status=undefined")
        return RunResult(command='map', digest=digest, summary={'status': sample.status})
    # value is the map point (a representative point for Set samples); objective is the base optimum
    shown = report.fmt_fixed(float(sample.point[0])) if sample.point.size == 1 else report.fmt_vector(sample.point)
    print(f"status={sample.status.lower()} value={shown}")
    print(f"objective={report.fmt_fixed(sample.value)}")
    if sample.status == 'Set':
        interval = sample.interval()
        if interval is not None:
            print(f"interval=[{report.fmt(interval[0])}, {report.fmt(interval[1])}]")
        print(f"width={report.fmt(sample.width)}")
        for g, h in sample.support:
            print(f"support {report.fmt_vector(g)}={report.fmt(h)}")
    return RunResult(command='map', digest=digest, summary={'status': sample.status})


def cmd_member(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    at = parse_vector(args.at)
    if args.candidate is None:
        theta = theta_membership(instance, args.side, at, opts)
        print(f"theta={theta.status.lower()} margin={report.fmt(theta.margin)}")
        return RunResult(command='member', digest=digest, summary={'theta': theta.status})
    member, residual = map_membership(instance, args.side, at, parse_vector(args.candidate), opts)
    print(f"member={str(member).lower()} residual={report.fmt(residual)}")
    return RunResult(command='member', digest=digest, summary={'member': member})


def cmd_derivative(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    at = parse_vector(args.at)
    result = directional_derivative(instance, args.side, at, parse_vector(args.direction), opts)
    fd = "none" if result.fd_check is None else report.fmt(result.fd_check)
    print(f"value={report.fmt_fixed(result.value)} fd_check={fd}")
    grad = gradient(instance, args.side, at, opts)
    if grad is not None:
        print(f"gradient={report.fmt_vector(grad)}")
    return RunResult(command='derivative', digest=digest, summary={'value': result.value})


def _emit(results: report.SavedResults, args, instance=None, opts: Optional[AnalysisOptions] = None) -> List[str]:
    outputs = []
    if args.csv:
        outputs.append(report.emit_report(results, 'csv', args.csv))
    if args.svg:
        outputs.append(report.emit_report(results, 'svg', args.svg))
    if getattr(args, 'table', ""):
        if instance is None:
            raise ValidationError("Table output needs the problem file (--problem)", check="argument")
        rows = report.table_rows(instance, report.table_params(results), opts)
        outputs.append(report.write_csv(rows, args.table))
    return outputs


def _print_results(results: report.SavedResults):
    frame = report.regions_frame(results)
    for row in frame.itertuples(index=False):
        print(f"region id={row.region_id} kind={row.kind} samples={row.samples} bbox={row.bbox} "
              f"witnesses={row.witnesses or '-'}")
    for t in results.transitions:
        print(f"transition location={report.fmt_vector(t.location)} accuracy={report.fmt(t.accuracy)}")
    print(f"unclassified_samples={results.unclassified_samples}")


def cmd_partition(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    window, grid = parse_window(args.window), parse_grid(args.grid)
    verification = None
    try:
        decomposition = decompose(instance, args.side, window, grid, opts)
        results = report.from_decomposition(decomposition, instance.name, digest)
        verification = verify_decomposition(instance, decomposition, opts)
    except WindowOutsideTheta as e:
        logger.warning(f"{e}; reporting a single OutsideTheta region")
        results = report.outside_results(instance.name, digest, normalize_side(args.side), window, grid)
    outputs = _emit(results, args, instance, opts)
    if args.save:
        outputs.append(report.save_results(results, args.save))
    _print_results(results)
    summary = report.summary(results)
    if verification is not None:
        for check in verification.checks:
            print(f"check {check.name}={'pass' if check.passed else 'fail'} {check.detail}")
        if not verification.passed:
            failed = verification.failed()
            raise VerificationFailure(f"Decomposition checks failed: {', '.join(failed)}", check=failed[0])
    return RunResult(command='partition', digest=digest, outputs=outputs, summary=summary)


def cmd_report(args, opts: AnalysisOptions) -> RunResult:
    results = report.load_results(args.results)
    instance = None
    if args.problem:
        instance = problem_file.load(args.problem)
        if problem_file.digest(instance) != results.digest:
            raise ValidationError(f"{args.problem} does not match the instance the results were computed from",
                                  check="digest")
    outputs = _emit(results, args, instance, opts)
    _print_results(results)
    return RunResult(command='report', digest=results.digest, outputs=outputs, summary=report.summary(results))


def cmd_verify(args, opts: AnalysisOptions) -> RunResult:
    instance, digest = _load(args.problem)
    ensure_valid(instance)
    verification = verify_samples(instance, args.samples, opts)
    for check in verification.checks:
        print(f"check {check.name}={'pass' if check.passed else 'fail'} {check.detail}")
    if not verification.passed:
        failed = verification.failed()
        raise VerificationFailure(f"Sampled checks failed: {', '.join(failed)}", check=failed[0])
    return RunResult(command='verify', digest=digest, summary={'checks': len(verification.checks)})


HANDLERS = {
    'validate': cmd_validate,
    'solve': cmd_solve,
    'map': cmd_map,
    'member': cmd_member,
    'derivative': cmd_derivative,
    'partition': cmd_partition,
    'report': cmd_report,
    'verify': cmd_verify,
}


def run(argv: Optional[Sequence[str]] = None) -> RunResult:
    """Parses a command line and runs it; MpcloError becomes a RunResult with the error's exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_values(argv))
    setup_logging(args.verbose)
    logger.info(f"mpclo {' '.join(argv)}")
    try:
        opts = analysis_options(args)
        result = HANDLERS[args.command](args, opts)
    except MpcloError as e:
        logger.error(f"{args.command} failed: {e}")
        print(str(e), file=sys.stderr)
        return RunResult(command=' '.join(argv), exit_code=e.exit_code, summary={'check': e.check})
    except ValueError as e:
        # option dataclasses reject out-of-range flag values
        logger.error(f"{args.command} failed: {e}")
        print(f"argument: {e}", file=sys.stderr)
        return RunResult(command=' '.join(argv), exit_code=ValidationError.exit_code, summary={'check': 'argument'})
    result.command = ' '.join(argv)
    logger.info(f"{args.command} finished: {result.summary} outputs={result.outputs}")
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the application."""
    return run(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
