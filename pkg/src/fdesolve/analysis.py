"""Reference solutions, error measures and the divergence study of the two-point scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .mittag_leffler import MlParams, gamma, ml
from .problem import FdeProblem, LinearTestProblem, Trajectory, TrajectoryKind, UniformGrid, make_grid
from .schemes import OneStep, SchemeConfig, SchemeKind, solve, solve_flawed

__all__ = [
    "DIVERGENCE_FACTOR",
    "ClaimedBound",
    "ConvergenceRow",
    "ErrorReport",
    "Refutation",
    "claimed_bound_for",
    "claimed_bound_value",
    "convergence_study",
    "eoc",
    "error_report",
    "exact_solution",
    "fit_growth_exponent",
    "local_truncation",
    "local_truncation_errors",
    "refute_theorem",
    "short_memory_study",
]

#: A run counts as diverged once its final error exceeds this multiple of max|y_exact|.
DIVERGENCE_FACTOR = 10.0


def exact_solution(problem: LinearTestProblem, grid: UniformGrid) -> Trajectory:
    """``y0 * E_alpha(lam * t_n**alpha)`` on every node."""
    params = MlParams(alpha=problem.alpha)
    t = grid.nodes()
    values = np.array([problem.y0 * ml(problem.lam * tn**problem.alpha, params) for tn in t])
    return Trajectory(grid=grid, values=values, kind=TrajectoryKind.EXACT, label="exact")


@dataclass(frozen=True)
class ErrorReport:
    grid: UniformGrid
    abs_errors: np.ndarray
    max_error: float
    final_error: float
    diverged: bool

    @property
    def argmax(self) -> int:
        finite = np.where(np.isfinite(self.abs_errors), self.abs_errors, -np.inf)
        return int(np.argmax(finite))


def _same_grid(a: UniformGrid, b: UniformGrid) -> bool:
    return a.h == b.h and a.n_steps == b.n_steps


def error_report(numeric: Trajectory, exact: Trajectory) -> ErrorReport:
    """Pointwise ``|y_n - y(t_n)|`` over the nodes the numeric run reached."""
    if not _same_grid(numeric.grid, exact.grid):
        raise ValueError(f"grid mismatch: {numeric.grid} vs {exact.grid}")
    if len(exact) != exact.grid.n_nodes:
        raise ValueError("the reference trajectory must cover the whole grid")
    n = len(numeric)
    errors = np.abs(numeric.values - exact.values[:n])
    finite = errors[np.isfinite(errors)]
    max_error = float(finite.max()) if finite.size else math.nan
    final_error = float(errors[-1])
    scale = float(np.max(np.abs(exact.values)))
    diverged = (
        numeric.diverged
        or finite.size != errors.size
        or final_error > DIVERGENCE_FACTOR * scale
    )
    errors.setflags(write=False)
    return ErrorReport(
        grid=numeric.grid, abs_errors=errors, max_error=max_error, final_error=final_error, diverged=bool(diverged)
    )


def eoc(err_coarse: float, err_fine: float) -> float:
    """Empirical order ``log2(err_coarse / err_fine)`` for a halved step."""
    if not (err_coarse > 0.0 and err_fine > 0.0):
        raise ValueError(f"errors must be positive, got {err_coarse!r}, {err_fine!r}")
    # difference of logs: the ratio itself may overflow
    return math.log2(err_coarse) - math.log2(err_fine)


def local_truncation(
    scheme_step: OneStep,
    problem: LinearTestProblem,
    grid: UniformGrid,
    n: int,
    exact: Optional[Trajectory] = None,
) -> float:
    """One-step defect ``|y(t_{n+1}) - step(exact history up to t_n)|``."""
    if not 1 <= n < grid.n_steps:
        raise ValueError(f"n must lie in [1, {grid.n_steps - 1}], got {n!r}")
    exact = exact if exact is not None else exact_solution(problem, grid)
    y_next = scheme_step(problem.as_fde(), grid, exact.values, n)
    return abs(float(exact.values[n + 1]) - y_next)


def local_truncation_errors(
    scheme_step: OneStep,
    problem: LinearTestProblem,
    grid: UniformGrid,
    ns: Optional[Iterable[int]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Defects for several ``n`` sharing one reference solution; returns ``(ns, taus)``."""
    exact = exact_solution(problem, grid)
    ns = np.arange(1, grid.n_steps) if ns is None else np.asarray(list(ns), dtype=int)
    taus = np.array([local_truncation(scheme_step, problem, grid, int(n), exact) for n in ns])
    return ns, taus


def fit_growth_exponent(
    ts: Sequence[float],
    vals: Sequence[float],
    window: Optional[slice] = None,
) -> float:
    """Least-squares slope of ``log vals`` against ``log ts``.

    Without ``window`` the fit uses the last half of the entries where both
    sequences are positive and finite.
    """
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if ts.shape != vals.shape:
        raise ValueError("ts and vals must have the same length")
    if window is None:
        keep = np.flatnonzero(np.isfinite(ts) & np.isfinite(vals) & (ts > 0) & (vals > 0))
        keep = keep[len(keep) // 2 :]
        x, y = ts[keep], vals[keep]
    else:
        x, y = ts[window], vals[window]
    if len(x) < 3:
        raise ValueError(f"need at least 3 points in the window, got {len(x)}")
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("windowed data must be strictly positive")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


@dataclass(frozen=True)
class ClaimedBound:
    """Parameters of the claimed ``O(h**3)`` error bound of the two-point scheme.

    ``M`` bounds ``|f|`` along the exact solution.
    """

    alpha: float
    h: float
    M: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        if not self.M >= 0.0:
            raise ValueError("M must be non-negative")


def claimed_bound_for(problem: FdeProblem, exact: Trajectory) -> ClaimedBound:
    t = exact.times()
    M = max(abs(problem.f(float(tn), float(yn))) for tn, yn in zip(t, exact.values))
    return ClaimedBound(alpha=problem.alpha, h=exact.grid.h, M=M)


def claimed_bound_value(cb: ClaimedBound, n: int) -> float:
    """``h**(3+alpha) M ((n+1)**alpha + n**alpha) / (12 Gamma(alpha+1))``."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n!r}")
    a = cb.alpha
    return cb.h ** (3.0 + a) * cb.M * ((n + 1) ** a + n**a) / (12.0 * gamma(a + 1.0))


@dataclass(frozen=True)
class Refutation:
    """Outcome of checking realized errors against the claimed bound.

    ``refuted`` is False only if no node violates the bound, which for the
    two-point scheme would point at a bug rather than at a valid bound.
    """

    refuted: bool
    first_violation: Optional[int]
    first_ratio: float
    worst_index: int
    worst_ratio: float
    h: float
    M: float
    errors: np.ndarray
    bounds: np.ndarray

    @property
    def first_violation_time(self) -> Optional[float]:
        return None if self.first_violation is None else self.first_violation * self.h


def refute_theorem(
    problem: LinearTestProblem,
    h: float,
    t_max: float,
    config: Optional[SchemeConfig] = None,
) -> Refutation:
    grid = make_grid(h, t_max)
    fde = problem.as_fde()
    numeric = solve_flawed(fde, grid, config or SchemeConfig(kind=SchemeKind.FLAWED_LOCAL))
    exact = exact_solution(problem, grid)
    report = error_report(numeric, exact)
    cb = claimed_bound_for(fde, exact)
    bounds = np.array([claimed_bound_value(cb, n) for n in range(len(report.abs_errors))])
    errors = report.abs_errors
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bounds > 0, errors / bounds, np.where(errors > 0, np.inf, 0.0))
    violating = np.flatnonzero(errors > bounds)
    finite_ratios = np.where(np.isfinite(ratios), ratios, -np.inf)
    worst = int(np.argmax(finite_ratios))
    first = int(violating[0]) if violating.size else None
    return Refutation(
        refuted=first is not None,
        first_violation=first,
        first_ratio=float(ratios[first]) if first is not None else 0.0,
        worst_index=worst,
        worst_ratio=float(ratios[worst]),
        h=grid.h,
        M=cb.M,
        errors=errors,
        bounds=bounds,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    max_error: float
    final_error: float
    eoc: Optional[float]
    diverged: bool


def convergence_study(
    problem: LinearTestProblem,
    config: SchemeConfig,
    hs: Sequence[float],
    t_max: float,
) -> list[ConvergenceRow]:
    """Max-norm and final-time errors for each step size; EOC between neighbours.

    ``hs`` must be strictly decreasing, each entry half of the previous one.
    The EOC is computed from the max-norm errors.
    """
    hs = [float(h) for h in hs]
    for coarse, fine in zip(hs, hs[1:]):
        if not math.isclose(fine, coarse / 2.0, rel_tol=1e-12):
            raise ValueError(f"step sizes must halve: {coarse!r} -> {fine!r}")
    rows: list[ConvergenceRow] = []
    fde = problem.as_fde()
    for h in hs:
        grid = make_grid(h, t_max)
        rep = error_report(solve(fde, grid, config), exact_solution(problem, grid))
        order = None
        if rows and rows[-1].max_error > 0.0 and rep.max_error > 0.0:
            order = eoc(rows[-1].max_error, rep.max_error)
        rows.append(ConvergenceRow(h, rep.max_error, rep.final_error, order, rep.diverged))
    return rows


def short_memory_study(
    problem: LinearTestProblem,
    h: float,
    t_max: float,
    windows: Sequence[Optional[int]],
) -> list[tuple[Optional[int], ErrorReport]]:
    """Error of the windowed rectangular rule for each memory window (``None`` = full)."""
    grid = make_grid(h, t_max)
    fde = problem.as_fde()
    exact = exact_solution(problem, grid)
    out = []
    for window in windows:
        config = SchemeConfig(kind=SchemeKind.SHORT_MEMORY, memory_window=window)
        out.append((window, error_report(solve(fde, grid, config), exact)))
    return out
