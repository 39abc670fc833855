import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdesolve.analysis import error_report, exact_solution
from fdesolve.problem import FdeProblem, LinearTestProblem, make_grid
from fdesolve.schemes import (
    Bootstrap,
    ImplicitSolveError,
    SchemeConfig,
    SchemeKind,
    abm_one_step,
    flawed_one_step,
    flawed_step,
    pi_rect_one_step,
    pi_trap_one_step,
    solve,
    solve_flawed,
    solve_pi,
    solve_short_memory,
)

ALL_KINDS = list(SchemeKind)


def _config(kind, **kw):
    if kind is SchemeKind.SHORT_MEMORY:
        kw.setdefault("memory_window", 3)
    return SchemeConfig(kind=kind, **kw)


def line_oracle(alpha, h, n, f_nm1, f_n, y_n):
    """Two-point step by quadrature of the line through (t_{n-1}, f_nm1), (t_n, f_n)."""
    with mpmath.workdps(30):
        a = mpmath.mpf(alpha)
        h = mpmath.mpf(h)
        t_nm1, t_n, t_np1 = (n - 1) * h, n * h, (n + 1) * h
        line = lambda s: f_n * (s - t_nm1) / h - f_nm1 * (s - t_n) / h  # noqa: E731
        # u = (T - s)**alpha removes the kernel singularity at s = T
        def weighted(T, brk):
            pts = [0] + [(T - b) ** a for b in brk] + [T**a]
            return mpmath.quad(lambda u: line(T - u ** (1 / a)), sorted(pts)) / a

        upper = weighted(t_np1, [t_n])
        lower = weighted(t_n, [])
        return float(y_n + (upper - lower) / mpmath.gamma(a))


# --- two-point scheme -------------------------------------------------------


def test_flawed_step_zero_rhs_keeps_value():
    assert flawed_step(0.8, 0.1, 3, 0.0, 0.0, 2.0) == 2.0


def test_flawed_step_needs_two_back_values():
    with pytest.raises(ValueError):
        flawed_step(0.8, 0.1, 0, 1.0, 1.0, 2.0)


@pytest.mark.parametrize("h, n", [(0.5, 1), (0.1, 7), (0.01, 250)])
@pytest.mark.parametrize("f_nm1, f_n", [(1.0, 0.0), (0.0, 1.0), (-0.7, 2.3)])
def test_flawed_step_alpha_one_is_adams_bashforth_2(h, n, f_nm1, f_n):
    y_n = 0.3
    expected = y_n + h * (1.5 * f_n - 0.5 * f_nm1)
    assert flawed_step(1.0, h, n, f_nm1, f_n, y_n) == pytest.approx(expected, abs=1e-12)


def closed_form_increment(alpha, h, n, f_nm1, f_n):
    """Literal two-point coefficients in 60-digit arithmetic."""
    with mpmath.workdps(60):
        a, h = mpmath.mpf(alpha), mpmath.mpf(h)
        t_nm1, t_n, t_np1 = (n - 1) * h, n * h, (n + 1) * h
        c_n = (
            2 * h * t_np1**a / (a * (a + 1))
            - t_nm1 * t_np1**a / (a + 1)
            - h * t_n**a / a
            + t_n ** (a + 1) / (a + 1)
        )
        c_nm1 = t_np1 ** (a + 1) / (a + 1) - h * t_np1**a / a - t_n ** (a + 1) / (a + 1)
        return (f_n * c_n + f_nm1 * c_nm1) / (h * mpmath.gamma(a))


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("n", [1, 2, 15, 16, 17, 100, 10**4, 10**7])
def test_flawed_step_keeps_relative_accuracy_for_large_n(alpha, n):
    # the coefficients switch to a series at n = 16; both sides must agree with the closed form
    h, f_nm1, f_n = 0.37, -0.9, 1.3
    expected = float(closed_form_increment(alpha, h, n, f_nm1, f_n))
    assert flawed_step(alpha, h, n, f_nm1, f_n, 0.0) == pytest.approx(expected, rel=1e-13)


@given(h=st.floats(1e-3, 1.0), n=st.integers(1, 10**6), f=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_flawed_step_alpha_one_is_adams_bashforth_2_everywhere(h, n, f):
    f_nm1, f_n = f
    expected = h * (1.5 * f_n - 0.5 * f_nm1)
    assert flawed_step(1.0, h, n, f_nm1, f_n, 0.0) == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_flawed_step_fixture(reference):
    ref = reference["flawed_step_n1"]
    got = flawed_step(0.8, 2.0**-4, 1, float(ref["f0"]), float(ref["f1"]), float(ref["y1_exact"]))
    assert got == pytest.approx(float(ref["y2"]), rel=1e-13)


@pytest.mark.parametrize("alpha, h, n", [(0.3, 0.25, 2), (0.8, 0.0625, 40), (0.6, 0.01, 300)])
def test_flawed_step_matches_line_quadrature(alpha, h, n):
    f_nm1, f_n, y_n = -1.3, 0.4, 0.9
    expected = line_oracle(alpha, h, n, f_nm1, f_n, y_n)
    assert flawed_step(alpha, h, n, f_nm1, f_n, y_n) == pytest.approx(expected, rel=1e-11, abs=1e-12)


def test_solve_flawed_zero_rhs(zero_problem):
    traj = solve_flawed(zero_problem.as_fde(), make_grid(0.1, 2.0))
    assert np.all(traj.values == 2.0)
    assert not traj.diverged


def test_solve_flawed_first_steps(test_problem):
    fde = test_problem.as_fde()
    grid = make_grid(2.0**-4, 1.0)
    for bootstrap, starter in ((Bootstrap.PI_TRAP_ONE_STEP, pi_trap_one_step), (Bootstrap.PI_RECT_ONE_STEP, pi_rect_one_step)):
        traj = solve_flawed(fde, grid, SchemeConfig(kind=SchemeKind.FLAWED_LOCAL, bootstrap=bootstrap))
        assert traj.values[0] == 2.0
        assert traj.values[1] == starter(fde, grid, [2.0], 0)
        assert traj.values[2] == flawed_one_step(fde, grid, traj.values, 1)


def test_solve_flawed_needs_two_steps(test_problem):
    with pytest.raises(ValueError):
        solve_flawed(test_problem.as_fde(), make_grid(0.5, 0.5))


def test_solve_flawed_rejects_other_kinds(test_problem):
    with pytest.raises(ValueError):
        solve_flawed(test_problem.as_fde(), make_grid(0.5, 2.0), SchemeConfig(kind=SchemeKind.ABM))


def test_solve_flawed_overflow_truncates_with_flag(test_problem):
    grid = make_grid(2.0**-4, 40.0)
    traj = solve_flawed(test_problem.as_fde(), grid)
    assert traj.diverged and traj.truncated
    assert np.all(np.isfinite(traj.values))
    assert len(traj.values) < grid.n_nodes


def test_flawed_scheme_departs_from_exact_solution(test_problem):
    # measured behaviour: wrong by ~60% of y(4) at t = 4, oscillating blow-up by t = 8
    fde = test_problem.as_fde()
    for t_max, expect_diverged in ((4.0, False), (8.0, True)):
        grid = make_grid(2.0**-4, t_max)
        rep = error_report(solve_flawed(fde, grid), exact_solution(test_problem, grid))
        assert rep.diverged is expect_diverged
    grid = make_grid(2.0**-4, 4.0)
    exact = exact_solution(test_problem, grid)
    rep = error_report(solve_flawed(fde, grid), exact)
    assert rep.final_error == pytest.approx(0.054780426735, rel=1e-9)
    assert rep.final_error > 0.5 * exact.values[-1]


def test_flawed_refinement_does_not_help(test_problem):
    fde = test_problem.as_fde()
    finals = []
    for h in (2.0**-4, 2.0**-5):
        grid = make_grid(h, 4.0)
        finals.append(error_report(solve_flawed(fde, grid), exact_solution(test_problem, grid)).final_error)
    assert finals[1] >= finals[0]


# --- product integration ----------------------------------------------------


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_zero_rhs_gives_constant_trajectory(kind, zero_problem):
    traj = solve(zero_problem.as_fde(), make_grid(0.1, 3.0), _config(kind))
    assert np.all(traj.values == zero_problem.y0)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_runs_are_bit_identical(kind, test_problem):
    grid = make_grid(2.0**-4, 4.0)
    a = solve(test_problem.as_fde(), grid, _config(kind))
    b = solve(test_problem.as_fde(), grid, _config(kind))
    assert a.values.tobytes() == b.values.tobytes()


def _classical(grid, lam, y0, step):
    y = [y0]
    for _ in range(grid.n_steps):
        y.append(step(y[-1]))
    return np.array(y)


def test_alpha_one_trapezoid_matches_classical(zero_problem):
    lam, h = -2.0, 0.05
    grid = make_grid(h, 2.0)
    traj = solve_pi(LinearTestProblem(1.0, lam, 2.0).as_fde(), grid, SchemeConfig(kind=SchemeKind.PI_TRAP_IMPLICIT))
    expected = _classical(grid, lam, 2.0, lambda y: y * (1 + h * lam / 2) / (1 - h * lam / 2))
    np.testing.assert_allclose(np.diff(traj.values), np.diff(expected), rtol=0, atol=1e-12)


def test_alpha_one_rectangle_is_forward_euler():
    lam, h = -2.0, 0.05
    grid = make_grid(h, 2.0)
    traj = solve_pi(LinearTestProblem(1.0, lam, 2.0).as_fde(), grid, SchemeConfig(kind=SchemeKind.PI_RECT_EXPLICIT))
    expected = _classical(grid, lam, 2.0, lambda y: y + h * lam * y)
    np.testing.assert_allclose(traj.values, expected, rtol=0, atol=1e-12)


def test_alpha_one_abm_is_heun():
    lam, h = -2.0, 0.05
    grid = make_grid(h, 2.0)
    traj = solve_pi(LinearTestProblem(1.0, lam, 2.0).as_fde(), grid, SchemeConfig(kind=SchemeKind.ABM))
    expected = _classical(grid, lam, 2.0, lambda y: y + h / 2 * (lam * y + lam * (y + h * lam * y)))
    np.testing.assert_allclose(traj.values, expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind, step", [
    (SchemeKind.PI_RECT_EXPLICIT, pi_rect_one_step),
    (SchemeKind.PI_TRAP_IMPLICIT, pi_trap_one_step),
    (SchemeKind.ABM, abm_one_step),
])
def test_one_step_maps_agree_with_full_solves(kind, step, test_problem):
    fde = test_problem.as_fde()
    grid = make_grid(2.0**-3, 3.0)
    traj = solve_pi(fde, grid, SchemeConfig(kind=kind))
    for n in (0, 1, 7, grid.n_steps - 1):
        assert step(fde, grid, traj.values, n) == pytest.approx(traj.values[n + 1], rel=1e-13, abs=1e-15)


def test_pi_trap_converges_with_order_one_plus_alpha(test_problem):
    errs = []
    for k in (4, 5, 6):
        grid = make_grid(2.0**-k, 4.0)
        traj = solve_pi(test_problem.as_fde(), grid, SchemeConfig(kind=SchemeKind.PI_TRAP_IMPLICIT))
        errs.append(error_report(traj, exact_solution(test_problem, grid)).max_error)
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert all(1.8 - 0.25 <= p <= 1.8 + 0.25 for p in orders), orders


def test_nonlinear_problem_with_smooth_solution():
    # y = t^2 solves D^a y = Gamma(3)/Gamma(3-a) t^(2-a) + y^2 - t^4, y(0) = 0
    a = 0.6
    c = math.gamma(3) / math.gamma(3 - a)
    fde = FdeProblem(alpha=a, rhs=lambda t, y: c * t ** (2 - a) + y * y - t**4, y0=0.0, label="t^2")
    errs = []
    for k in (4, 5, 6):
        grid = make_grid(2.0**-k, 1.0)
        traj = solve_pi(fde, grid, SchemeConfig(kind=SchemeKind.PI_TRAP_IMPLICIT))
        errs.append(np.max(np.abs(traj.values - grid.nodes() ** 2)))
    assert errs[0] < 1e-2
    assert all(math.log2(x / y) > 1.3 for x, y in zip(errs, errs[1:]))


def test_implicit_solve_reports_failing_step():
    fde = FdeProblem(alpha=0.5, rhs=lambda t, y: 50.0 * math.cos(y), y0=0.0)
    with pytest.raises(ImplicitSolveError) as info:
        solve_pi(fde, make_grid(0.5, 2.0), SchemeConfig(kind=SchemeKind.PI_TRAP_IMPLICIT, newton_max_iter=2))
    assert info.value.step == 1


def test_implicit_solve_falls_back_when_fixed_point_diverges():
    # stiff linear problem: the fixed-point map has slope h^a a_0 |lam| > 1
    prob = LinearTestProblem(0.8, -200.0, 1.0)
    grid = make_grid(0.1, 1.0)
    traj = solve_pi(prob.as_fde(), grid, SchemeConfig(kind=SchemeKind.PI_TRAP_IMPLICIT))
    assert np.all(np.isfinite(traj.values))
    assert traj.values[1] == pytest.approx(pi_trap_one_step(prob.as_fde(), grid, traj.values, 0), rel=1e-12)


def test_rhs_failure_propagates():
    def bad(t, y):
        raise ZeroDivisionError("boom")

    with pytest.raises(RuntimeError, match="rhs evaluation failed"):
        solve_pi(FdeProblem(alpha=0.5, rhs=bad, y0=1.0), make_grid(0.1, 1.0))


# --- short memory -------------------------------------------------------------


def test_short_memory_full_window_is_bit_identical(test_problem):
    fde = test_problem.as_fde()
    grid = make_grid(2.0**-4, 4.0)
    full = solve_pi(fde, grid, SchemeConfig(kind=SchemeKind.PI_RECT_EXPLICIT))
    for window in (None, grid.n_steps, grid.n_steps + 10):
        short = solve_short_memory(fde, grid, SchemeConfig(kind=SchemeKind.SHORT_MEMORY, memory_window=window))
        assert short.values.tobytes() == full.values.tobytes()


def test_short_memory_window_is_sliding(test_problem):
    fde = test_problem.as_fde()
    grid = make_grid(0.25, 2.0)
    L = 3
    traj = solve_short_memory(fde, grid, SchemeConfig(kind=SchemeKind.SHORT_MEMORY, memory_window=L))
    b = ((np.arange(1, 10) ** 0.8) - (np.arange(0, 9) ** 0.8)) / math.gamma(1.8)
    y = [2.0]
    for n in range(grid.n_steps):
        js = range(max(0, n - L + 1), n + 1)
        y.append(2.0 + 0.25**0.8 * sum(b[n - j] * (-2.0 * y[j]) for j in js))
    np.testing.assert_allclose(traj.values, y, rtol=1e-13)


def test_short_memory_errors_shrink_as_window_grows(test_problem):
    fde = test_problem.as_fde()
    grid = make_grid(2.0**-4, 4.0)
    exact = exact_solution(test_problem, grid)
    errs = [
        error_report(solve_short_memory(fde, grid, SchemeConfig(kind=SchemeKind.SHORT_MEMORY, memory_window=L)), exact).max_error
        for L in (1, 4, 16, 64)
    ]
    assert all(a >= b for a, b in zip(errs, errs[1:]))
    assert errs[0] > errs[-1]


def test_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(memory_window=0)
    with pytest.raises(ValueError):
        SchemeConfig(newton_tol=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(kind="bogus")
    assert SchemeConfig(kind="abm").kind is SchemeKind.ABM
