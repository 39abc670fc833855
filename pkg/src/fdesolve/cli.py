"""Command-line front end.

Subcommands write CSV (to ``--output`` or stdout):

* ``solve``: one run of one scheme on the linear test problem;
* ``reproduce fig1|fig2``: exact vs two-point solution, and their difference;
* ``convergence``: errors and EOC over a sequence of halved steps;
* ``short-memory-study``: error of the windowed rectangular rule per window.

Exit status: 0 success, 1 usage or I/O error, 2 divergence detected.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional, Sequence, TextIO

from .analysis import convergence_study, error_report, exact_solution, short_memory_study
from .mittag_leffler import MittagLefflerConvergenceError
from .problem import LinearTestProblem, make_grid
from .schemes import Bootstrap, ImplicitSolveError, SchemeConfig, SchemeKind, solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2

SCHEMES = {
    "flawed": SchemeKind.FLAWED_LOCAL,
    "pi-rect": SchemeKind.PI_RECT_EXPLICIT,
    "pi-trap": SchemeKind.PI_TRAP_IMPLICIT,
    "abm": SchemeKind.ABM,
    "short-memory": SchemeKind.SHORT_MEMORY,
}
BOOTSTRAPS = {"pi-trap": Bootstrap.PI_TRAP_ONE_STEP, "pi-rect": Bootstrap.PI_RECT_ONE_STEP}

# the reference experiment; `reproduce` needs no flags
DEFAULT_ALPHA = 0.8
DEFAULT_LAMBDA = -2.0
DEFAULT_Y0 = 2.0
DEFAULT_H = 2.0**-4
DEFAULT_T_MAX = 4.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for divergence here
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """17 significant digits: round-trips a double, no locale involved."""
    return format(float(x), ".17g")


def _csv(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def _emit(text: str, output: Optional[str], stdout: TextIO) -> None:
    if output is None or output == "-":
        stdout.write(text)
        return
    try:
        with open(output, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {output}: {exc.strerror or exc}") from exc


def _finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise UsageError(f"--{name} must be finite")
    return value


def _problem(args: argparse.Namespace) -> LinearTestProblem:
    alpha = _finite("alpha", args.alpha)
    try:
        return LinearTestProblem(alpha=alpha, lam=_finite("lambda", args.lam), y0=_finite("y0", args.y0))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _window(args: argparse.Namespace, h: float) -> Optional[int]:
    if args.memory_window is not None and args.memory_time is not None:
        raise UsageError("give either --memory-window or --memory-time, not both")
    if args.memory_time is not None:
        return max(1, round(_finite("memory-time", args.memory_time) / h))
    return args.memory_window


def _config(args: argparse.Namespace, h: float) -> SchemeConfig:
    kind = SCHEMES[args.scheme]
    window = _window(args, h)
    if kind is SchemeKind.SHORT_MEMORY and window is None:
        raise UsageError("--scheme short-memory needs --memory-window or --memory-time")
    try:
        return SchemeConfig(kind=kind, bootstrap=BOOTSTRAPS[args.bootstrap], memory_window=window)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _grid(h: float, t_max: float):
    try:
        return make_grid(_finite("h", h), _finite("t-max", t_max))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_solve(args: argparse.Namespace, stdout: TextIO) -> int:
    problem = _problem(args)
    grid = _grid(args.h, args.t_max)
    config = _config(args, grid.h)
    numeric = solve(problem.as_fde(), grid, config)
    exact = exact_solution(problem, grid)
    report = error_report(numeric, exact)
    t = numeric.times()
    rows = [
        (str(n), fmt(t[n]), fmt(numeric.values[n]), fmt(exact.values[n]), fmt(report.abs_errors[n]))
        for n in range(len(numeric))
    ]
    _emit(_csv(("n", "t", "y_numeric", "y_exact", "abs_error"), rows), args.output, stdout)
    if report.diverged:
        print(
            f"diverged: final error {report.final_error:.6g} exceeds 10 x max|y_exact|"
            + (" (run overflowed and was truncated)" if numeric.truncated else ""),
            file=sys.stderr,
        )
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, stdout: TextIO) -> int:
    problem = LinearTestProblem(DEFAULT_ALPHA, DEFAULT_LAMBDA, DEFAULT_Y0)
    grid = _grid(DEFAULT_H, args.t_max)
    config = SchemeConfig(kind=SchemeKind.FLAWED_LOCAL, bootstrap=Bootstrap.PI_TRAP_ONE_STEP)
    numeric = solve(problem.as_fde(), grid, config)
    exact = exact_solution(problem, grid)
    report = error_report(numeric, exact)
    t = grid.nodes()
    n_num = len(numeric)
    if args.figure == "fig1":
        header = ("t", "y_exact", "y_flawed")
        rows = [
            (fmt(t[n]), fmt(exact.values[n]), fmt(numeric.values[n]) if n < n_num else "")
            for n in range(grid.n_nodes)
        ]
    else:
        header = ("t", "abs_error")
        rows = [(fmt(t[n]), fmt(report.abs_errors[n])) for n in range(n_num)]
    _emit(_csv(header, rows), args.output, stdout)
    return EXIT_OK


def _h_list(args: argparse.Namespace) -> list[float]:
    if args.h_list:
        try:
            hs = [float(tok) for tok in args.h_list.split(",") if tok.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --h-list: {exc}") from exc
    else:
        if args.levels < 2:
            raise UsageError("--levels must be at least 2")
        hs = [args.h / 2**i for i in range(args.levels)]
    if len(hs) < 2:
        raise UsageError("need at least two step sizes")
    for h in hs:
        _finite("h-list", h)
    return hs


def cmd_convergence(args: argparse.Namespace, stdout: TextIO) -> int:
    problem = _problem(args)
    hs = _h_list(args)
    config = _config(args, hs[0])
    if config.kind is SchemeKind.SHORT_MEMORY:
        raise UsageError("convergence studies use full-memory schemes; see short-memory-study")
    try:
        rows = convergence_study(problem, config, hs, _finite("t-max", args.t_max))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = [
        (fmt(r.h), fmt(r.max_error), fmt(r.final_error), "" if r.eoc is None else fmt(r.eoc)) for r in rows
    ]
    _emit(_csv(("h", "max_error", "final_error", "eoc"), out), args.output, stdout)
    return EXIT_DIVERGED if any(r.diverged for r in rows) else EXIT_OK


def _windows(spec: str) -> list[Optional[int]]:
    out: list[Optional[int]] = []
    for tok in spec.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "full":
            out.append(None)
            continue
        try:
            w = int(tok)
        except ValueError as exc:
            raise UsageError(f"bad memory window {tok!r}") from exc
        if w < 1:
            raise UsageError("memory windows must be >= 1")
        out.append(w)
    if not out:
        raise UsageError("no memory windows given")
    return out


def cmd_short_memory_study(args: argparse.Namespace, stdout: TextIO) -> int:
    problem = _problem(args)
    grid = _grid(args.h, args.t_max)
    results = short_memory_study(problem, grid.h, args.t_max, _windows(args.windows))
    rows = [
        ("full" if w is None else str(w), fmt(rep.max_error), fmt(rep.final_error)) for w, rep in results
    ]
    _emit(_csv(("memory_window", "max_error", "final_error"), rows), args.output, stdout)
    return EXIT_OK


def _add_problem_flags(p: argparse.ArgumentParser, scheme: bool = True) -> None:
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="fractional order, 0 < alpha < 1")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help="coefficient of D^a y = lambda y")
    p.add_argument("--y0", type=float, default=DEFAULT_Y0, help="initial value")
    p.add_argument("--h", type=float, default=DEFAULT_H, help="step size")
    p.add_argument("--t-max", type=float, default=DEFAULT_T_MAX, help="final time")
    if scheme:
        p.add_argument("--scheme", choices=sorted(SCHEMES), default="pi-trap")
        p.add_argument("--memory-window", type=int, default=None, help="short-memory window in grid nodes")
        p.add_argument("--memory-time", type=float, default=None, help="short-memory window in time units")
        p.add_argument("--bootstrap", choices=sorted(BOOTSTRAPS), default="pi-trap", help="starter for the flawed scheme")
    p.add_argument("--output", "-o", default=None, help="CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdesolve", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve the linear test problem with one scheme")
    _add_problem_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("reproduce", help="CSV data for the comparison (fig1) and error (fig2) plots")
    p.add_argument("figure", choices=("fig1", "fig2"))
    p.add_argument("--t-max", type=float, default=DEFAULT_T_MAX, help="final time (default 4)")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("convergence", help="errors and EOC over halved step sizes")
    _add_problem_flags(p)
    p.add_argument("--h-list", default=None, help="comma-separated step sizes, each half the previous")
    p.add_argument("--levels", type=int, default=4, help="number of halvings of --h when --h-list is absent")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("short-memory-study", help="windowed rectangular rule, one row per window")
    _add_problem_flags(p, scheme=False)
    p.add_argument("--windows", default="1,4,16,64,full", help="comma-separated windows (nodes) or 'full'")
    p.set_defaults(func=cmd_short_memory_study)
    return parser


def main(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, stdout)
    except UsageError as exc:
        print(f"fdesolve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ImplicitSolveError, MittagLefflerConvergenceError) as exc:
        print(f"fdesolve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
