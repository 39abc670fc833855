"""Product-integration solvers for scalar Caputo equations of order 0 < alpha < 1,
the two-point "local" scheme they are compared against, and the tools to
measure how each behaves (Mittag-Leffler reference solutions, EOC, defect
growth, bound checks).
"""

from .analysis import (
    ClaimedBound,
    ErrorReport,
    Refutation,
    claimed_bound_value,
    convergence_study,
    eoc,
    error_report,
    exact_solution,
    fit_growth_exponent,
    local_truncation,
    refute_theorem,
)
from .mittag_leffler import MittagLefflerConvergenceError, MlParams, gamma, ml
from .problem import FdeProblem, LinearTestProblem, Trajectory, UniformGrid, make_grid
from .schemes import (
    Bootstrap,
    ConvolutionWeights,
    ImplicitSolveError,
    SchemeConfig,
    SchemeKind,
    flawed_step,
    pi_rect_weights,
    pi_trap_weights,
    solve,
    solve_flawed,
    solve_pi,
    solve_short_memory,
)

__version__ = "0.1.0"
