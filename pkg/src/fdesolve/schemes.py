"""Time-stepping schemes for scalar Caputo problems.

All schemes start from the Volterra form

    y(t) = y0 + 1/Gamma(alpha) * int_0^t (t - s)**(alpha - 1) f(s, y(s)) ds.

Product-integration (PI) rules replace ``f`` by a piecewise interpolant on the
grid and integrate each piece against the kernel exactly:

* ``pi_rect_explicit``: piecewise constant (left value), weights ``b_k``;
* ``pi_trap_implicit``: piecewise linear, weights ``a_k`` plus a start weight;
* ``abm``: rectangular predictor followed by one trapezoidal corrector;
* ``short_memory``: the rectangular rule with the history sum cut to a
  sliding window of the most recent nodes.

``flawed_local`` is the two-point "local" scheme that uses one linear
interpolant through ``t_{n-1}, t_n`` over the whole of ``[0, t_{n+1}]``. It
has no memory term and does not converge; it is kept as the object of study
for :mod:`fdesolve.analysis`.

History sums are direct ``O(N**2)`` convolutions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .mittag_leffler import gamma
from .problem import FdeProblem, Trajectory, TrajectoryKind, UniformGrid

__all__ = [
    "Bootstrap",
    "ConvolutionWeights",
    "ImplicitSolveError",
    "OneStep",
    "SchemeConfig",
    "SchemeKind",
    "abm_one_step",
    "flawed_one_step",
    "flawed_step",
    "pi_rect_one_step",
    "pi_rect_weights",
    "pi_trap_one_step",
    "pi_trap_weights",
    "solve",
    "solve_flawed",
    "solve_pi",
    "solve_short_memory",
]


class SchemeKind(str, enum.Enum):
    FLAWED_LOCAL = "flawed_local"
    PI_RECT_EXPLICIT = "pi_rect_explicit"
    PI_TRAP_IMPLICIT = "pi_trap_implicit"
    ABM = "abm"
    SHORT_MEMORY = "short_memory"


class Bootstrap(str, enum.Enum):
    PI_TRAP_ONE_STEP = "pi_trap_one_step"
    PI_RECT_ONE_STEP = "pi_rect_one_step"


class ImplicitSolveError(RuntimeError):
    def __init__(self, step: int, iterations: int, residual: float) -> None:
        super().__init__(
            f"implicit solve for y_{step} did not converge in {iterations} iterations (last residual {residual:.3g})"
        )
        self.step = step
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme selector and its parameters.

    ``memory_window`` is a node count; ``None`` keeps the full history.
    """

    kind: SchemeKind = SchemeKind.PI_TRAP_IMPLICIT
    bootstrap: Bootstrap = Bootstrap.PI_TRAP_ONE_STEP
    memory_window: Optional[int] = None
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        object.__setattr__(self, "bootstrap", Bootstrap(self.bootstrap))
        if self.memory_window is not None and self.memory_window < 1:
            raise ValueError(f"memory_window must be >= 1, got {self.memory_window!r}")
        if not self.newton_tol > 0.0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be positive")


@dataclass(frozen=True)
class ConvolutionWeights:
    """PI quadrature weights, already divided by the gamma factor.

    ``a_tilde_0[n]`` is the weight of ``f(t_0, y_0)`` in the trapezoidal
    formula for ``y_{n+1}``.
    """

    alpha: float
    a: Optional[np.ndarray] = None
    a_tilde_0: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# weights

# below this index the closed forms are evaluated directly (exact at alpha = 1);
# above it, binomial series avoid the cancellation in the differences of powers
_DIRECT_LIMIT = 16
_SERIES_TERMS = 18


def _check_order(alpha: float, n: int) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n!r}")


def _binomials(p: float, m_max: int) -> np.ndarray:
    c = np.empty(m_max + 1)
    c[0] = 1.0
    for m in range(1, m_max + 1):
        c[m] = c[m - 1] * (p - m + 1) / m
    return c


def _second_difference(p: float, k: np.ndarray) -> np.ndarray:
    """``(k+1)**p - 2 k**p + (k-1)**p`` for integers ``k >= 1``."""
    kf = k.astype(float)
    out = (kf + 1.0) ** p - 2.0 * kf**p + (kf - 1.0) ** p
    big = k >= _DIRECT_LIMIT
    if np.any(big):
        x2 = (1.0 / kf[big]) ** 2
        c = _binomials(p, 2 * _SERIES_TERMS)
        s = np.zeros_like(x2)
        for m in range(_SERIES_TERMS, 0, -1):
            s = (s + c[2 * m]) * x2
        out[big] = 2.0 * kf[big] ** p * s
    return out


def _trap_start(alpha: float, n: np.ndarray) -> np.ndarray:
    """``n**(alpha+1) - (n - alpha) (n+1)**alpha`` for integers ``n >= 0``."""
    nf = n.astype(float)
    out = nf ** (alpha + 1.0) - (nf - alpha) * (nf + 1.0) ** alpha
    big = n >= _DIRECT_LIMIT
    if np.any(big):
        # n**(alpha+1) * sum_{m>=2} (alpha C(alpha, m-1) - C(alpha, m)) n**-m
        x = 1.0 / nf[big]
        c = _binomials(alpha, 2 * _SERIES_TERMS)
        s = np.zeros_like(x)
        for m in range(2 * _SERIES_TERMS, 1, -1):
            s = (s + (alpha * c[m - 1] - c[m])) * x
        out[big] = nf[big] ** (alpha + 1.0) * s * x
    return out


def pi_rect_weights(alpha: float, n: int) -> ConvolutionWeights:
    """``b_k = ((k+1)**alpha - k**alpha) / Gamma(alpha+1)`` for ``k = 0..n``."""
    _check_order(alpha, n)
    k = np.arange(1, n + 1, dtype=float)
    b = np.empty(n + 1)
    b[0] = 1.0
    b[1:] = k**alpha * np.expm1(alpha * np.log1p(1.0 / k))
    b /= gamma(alpha + 1.0)
    b.setflags(write=False)
    return ConvolutionWeights(alpha=alpha, b=b)


def pi_trap_weights(alpha: float, n: int) -> ConvolutionWeights:
    """Trapezoidal PI weights ``a_0..a_n`` and start weights for steps ``0..n``."""
    _check_order(alpha, n)
    g = gamma(alpha + 2.0)
    idx = np.arange(n + 1)
    a = np.empty(n + 1)
    a[0] = 1.0
    a[1:] = _second_difference(alpha + 1.0, idx[1:])
    a /= g
    a_tilde = _trap_start(alpha, idx) / g
    a.setflags(write=False)
    a_tilde.setflags(write=False)
    return ConvolutionWeights(alpha=alpha, a=a, a_tilde_0=a_tilde)


# ---------------------------------------------------------------------------
# history sums and the implicit solve


def _rect_history(b: np.ndarray, f: np.ndarray, n: int, start: int = 0) -> float:
    # sum_{j=start..n} b_{n-j} f_j
    return float(np.dot(b[n - start :: -1], f[start : n + 1]))


def _trap_history(a: np.ndarray, a_tilde: np.ndarray, f: np.ndarray, n: int) -> float:
    # a~_{n+1,0} f_0 + sum_{j=1..n} a_{n+1-j} f_j
    return float(a_tilde[n] * f[0] + np.dot(a[n:0:-1], f[1 : n + 1]))


def _solve_implicit(
    problem: FdeProblem,
    t: float,
    c: float,
    gam: float,
    guess: float,
    tol: float,
    max_iter: int,
    step: int,
) -> float:
    """Solve ``y = c + gam * f(t, y)``: fixed point, then secant if that stalls."""
    y = guess
    r_prev = math.inf
    it = 0
    while it < max_iter:
        it += 1
        g = c + gam * problem.f(t, y)
        r = g - y
        if abs(r) <= tol * max(1.0, abs(g)):
            return g
        if not math.isfinite(r) or abs(r) >= 0.9 * r_prev:
            break
        r_prev = abs(r)
        y = g
    else:
        raise ImplicitSolveError(step, it, r_prev)

    # secant on G(y) = y - c - gam f(t, y)
    y0, y1 = guess, y
    g0 = y0 - c - gam * problem.f(t, y0)
    g1 = y1 - c - gam * problem.f(t, y1)
    if y0 == y1:
        y1 = y0 + max(1.0, abs(y0)) * 1e-6
        g1 = y1 - c - gam * problem.f(t, y1)
    while it < max_iter:
        it += 1
        if g1 == g0:
            break
        y2 = y1 - g1 * (y1 - y0) / (g1 - g0)
        if abs(y2 - y1) <= tol * max(1.0, abs(y2)):
            return y2
        y0, g0 = y1, g1
        y1 = y2
        g1 = y1 - c - gam * problem.f(t, y1)
    raise ImplicitSolveError(step, it, abs(g1))


# ---------------------------------------------------------------------------
# the two-point local scheme


def _flawed_remainder(alpha: float, n: int) -> float:
    """``B = x/alpha - ((1+x)**(alpha+1) - 1)/(alpha+1)`` at ``x = 1/n``, without cancellation."""
    x = 1.0 / n
    if n < _DIRECT_LIMIT:
        return x / alpha - math.expm1((alpha + 1.0) * math.log1p(x)) / (alpha + 1.0)
    # (1+x)**(alpha+1) - 1 = (alpha+1) * sum_j binom(alpha, j-1) x**j / j; j = 1 is cancelled by hand
    c = _binomials(alpha, _SERIES_TERMS)
    s = 0.0
    for j in range(_SERIES_TERMS + 1, 1, -1):
        s = (s + c[j - 1] / j) * x
    return x * (1.0 - alpha) / alpha - s * x


def flawed_step(alpha: float, h: float, n: int, f_nm1: float, f_n: float, y_n: float) -> float:
    """One step ``y_n -> y_{n+1}`` of the two-point local scheme.

    ``f`` is replaced on all of ``[0, t_{n+1}]`` by the line through
    ``(t_{n-1}, f_nm1)`` and ``(t_n, f_n)``; the increment is the difference
    of the two kernel integrals of that line.

    The closed-form coefficients are differences of nearly equal powers of
    ``t_n`` and ``t_{n+1}``. Writing them in ``x = h / t_n = 1/n`` as

        C_n   = h**(alpha+1) * (2 n**alpha expm1(alpha log1p(x)) / alpha + n**(alpha+1) B)
        C_n-1 = -h**(alpha+1) * (n**alpha expm1(alpha log1p(x)) / alpha + n**(alpha+1) B)

    keeps full relative accuracy for any ``n``.
    """
    if n < 1:
        raise ValueError(f"the two-point scheme needs n >= 1 (it uses t_(n-1)); got n={n!r}")
    a = alpha
    na = float(n) ** a
    head = na * math.expm1(a * math.log1p(1.0 / n)) / a
    tail = na * n * _flawed_remainder(a, n)
    scale = h**a / gamma(a)
    return y_n + scale * (f_n * (2.0 * head + tail) - f_nm1 * (head + tail))


# ---------------------------------------------------------------------------
# one-step maps from a given history (also used for local truncation defects)

OneStep = Callable[[FdeProblem, UniformGrid, Sequence[float], int], float]


def _f_history(problem: FdeProblem, grid: UniformGrid, history: Sequence[float], n: int) -> np.ndarray:
    if n < 0 or len(history) < n + 1:
        raise ValueError(f"history must hold y_0..y_{n}")
    return np.array([problem.f(grid.t(j), float(history[j])) for j in range(n + 1)])


def flawed_one_step(
    problem: FdeProblem, grid: UniformGrid, history: Sequence[float], n: int, config: Optional[SchemeConfig] = None
) -> float:
    """``y_{n+1}`` of the two-point scheme from ``history[n-1]`` and ``history[n]``."""
    if n < 1:
        raise ValueError(f"the two-point scheme needs n >= 1, got {n!r}")
    f_nm1 = problem.f(grid.t(n - 1), float(history[n - 1]))
    f_n = problem.f(grid.t(n), float(history[n]))
    return flawed_step(problem.alpha, grid.h, n, f_nm1, f_n, float(history[n]))


def pi_rect_one_step(
    problem: FdeProblem, grid: UniformGrid, history: Sequence[float], n: int, config: Optional[SchemeConfig] = None
) -> float:
    f = _f_history(problem, grid, history, n)
    b = pi_rect_weights(problem.alpha, n).b
    return problem.y0 + grid.h**problem.alpha * _rect_history(b, f, n)


def pi_trap_one_step(
    problem: FdeProblem, grid: UniformGrid, history: Sequence[float], n: int, config: Optional[SchemeConfig] = None
) -> float:
    config = config or SchemeConfig()
    f = _f_history(problem, grid, history, n)
    w = pi_trap_weights(problem.alpha, n + 1)
    b = pi_rect_weights(problem.alpha, n).b
    ha = grid.h**problem.alpha
    guess = problem.y0 + ha * _rect_history(b, f, n)
    c = problem.y0 + ha * _trap_history(w.a, w.a_tilde_0, f, n)
    return _solve_implicit(
        problem, grid.t(n + 1), c, ha * w.a[0], guess, config.newton_tol, config.newton_max_iter, n + 1
    )


def abm_one_step(
    problem: FdeProblem, grid: UniformGrid, history: Sequence[float], n: int, config: Optional[SchemeConfig] = None
) -> float:
    f = _f_history(problem, grid, history, n)
    w = pi_trap_weights(problem.alpha, n + 1)
    b = pi_rect_weights(problem.alpha, n).b
    ha = grid.h**problem.alpha
    predicted = problem.y0 + ha * _rect_history(b, f, n)
    c = problem.y0 + ha * _trap_history(w.a, w.a_tilde_0, f, n)
    return c + ha * w.a[0] * problem.f(grid.t(n + 1), predicted)


# ---------------------------------------------------------------------------
# full solves


class _Run:
    """Solution and rhs buffers; cuts the run at the first non-finite value."""

    def __init__(self, problem: FdeProblem, grid: UniformGrid, label: str) -> None:
        self.problem = problem
        self.grid = grid
        self.label = label
        self.y = np.empty(grid.n_nodes)
        self.f = np.empty(grid.n_nodes)
        self.y[0] = problem.y0
        self.f[0] = problem.f(0.0, problem.y0)
        self.last = 0

    def push(self, n: int, value: float) -> bool:
        """Store ``y_n``; return False once the run has left the floats."""
        if not math.isfinite(value):
            return False
        fv = self.problem.f(self.grid.t(n), value)
        self.y[n] = value
        self.f[n] = fv
        self.last = n
        return math.isfinite(fv)

    def trajectory(self) -> Trajectory:
        complete = self.last == self.grid.n_steps
        return Trajectory(
            grid=self.grid,
            values=self.y[: self.last + 1].copy(),
            kind=TrajectoryKind.NUMERIC,
            diverged=not complete,
            label=self.label,
        )


def solve_flawed(problem: FdeProblem, grid: UniformGrid, config: Optional[SchemeConfig] = None) -> Trajectory:
    """Run the two-point scheme; ``y_1`` comes from one step of a PI rule."""
    config = config or SchemeConfig(kind=SchemeKind.FLAWED_LOCAL)
    if config.kind is not SchemeKind.FLAWED_LOCAL:
        raise ValueError(f"solve_flawed needs kind=flawed_local, got {config.kind.value}")
    if grid.n_steps < 2:
        raise ValueError("the two-point scheme needs at least two steps")
    run = _Run(problem, grid, "flawed_local")
    starter = pi_trap_one_step if config.bootstrap is Bootstrap.PI_TRAP_ONE_STEP else pi_rect_one_step
    if run.push(1, starter(problem, grid, run.y, 0, config)):
        # overflow is expected once the scheme blows up; push() truncates there
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(1, grid.n_steps):
                y_next = flawed_step(problem.alpha, grid.h, n, run.f[n - 1], run.f[n], run.y[n])
                if not run.push(n + 1, y_next):
                    break
    return run.trajectory()


def _rect_loop(problem: FdeProblem, grid: UniformGrid, window: Optional[int], label: str) -> Trajectory:
    run = _Run(problem, grid, label)
    b = pi_rect_weights(problem.alpha, grid.n_steps).b
    ha = grid.h**problem.alpha
    for n in range(grid.n_steps):
        start = 0 if window is None else max(0, n - window + 1)
        if not run.push(n + 1, problem.y0 + ha * _rect_history(b, run.f, n, start)):
            break
    return run.trajectory()


def solve_pi(problem: FdeProblem, grid: UniformGrid, config: Optional[SchemeConfig] = None) -> Trajectory:
    """Solve with a full-memory PI rule (rectangular, trapezoidal or ABM)."""
    config = config or SchemeConfig()
    kind = config.kind
    if kind is SchemeKind.PI_RECT_EXPLICIT:
        return _rect_loop(problem, grid, None, kind.value)
    if kind not in (SchemeKind.PI_TRAP_IMPLICIT, SchemeKind.ABM):
        raise ValueError(f"solve_pi does not handle {kind.value}")

    run = _Run(problem, grid, kind.value)
    N = grid.n_steps
    b = pi_rect_weights(problem.alpha, N).b
    w = pi_trap_weights(problem.alpha, N)
    ha = grid.h**problem.alpha
    gam = ha * w.a[0]
    for n in range(N):
        t_next = grid.t(n + 1)
        predicted = problem.y0 + ha * _rect_history(b, run.f, n)
        c = problem.y0 + ha * _trap_history(w.a, w.a_tilde_0, run.f, n)
        if kind is SchemeKind.ABM:
            y_next = c + gam * problem.f(t_next, predicted) if math.isfinite(predicted) else predicted
        else:
            y_next = _solve_implicit(problem, t_next, c, gam, predicted, config.newton_tol, config.newton_max_iter, n + 1)
        if not run.push(n + 1, y_next):
            break
    return run.trajectory()


def solve_short_memory(problem: FdeProblem, grid: UniformGrid, config: SchemeConfig) -> Trajectory:
    """Rectangular PI rule keeping only the ``memory_window`` most recent nodes.

    ``y0`` always stays in the formula; with ``memory_window=None`` (or a
    window covering the grid) the result is the full rectangular rule.
    """
    if config.kind is not SchemeKind.SHORT_MEMORY:
        raise ValueError(f"solve_short_memory needs kind=short_memory, got {config.kind.value}")
    window = config.memory_window
    if window is not None and window >= grid.n_steps:
        window = None
    return _rect_loop(problem, grid, window, SchemeKind.SHORT_MEMORY.value)


def solve(problem: FdeProblem, grid: UniformGrid, config: Optional[SchemeConfig] = None) -> Trajectory:
    """Dispatch on ``config.kind``; the default is the implicit trapezoidal PI rule."""
    config = config or SchemeConfig()
    if config.kind is SchemeKind.FLAWED_LOCAL:
        return solve_flawed(problem, grid, config)
    if config.kind is SchemeKind.SHORT_MEMORY:
        return solve_short_memory(problem, grid, config)
    return solve_pi(problem, grid, config)
