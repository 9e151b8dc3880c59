"""High-order semi-Lagrangian and finite-difference solvers for stationary HJB equations
using truncated Gauss-Lobatto-Legendre interpolation."""

from .finite_difference import (
    EigenDecomposition,
    FDParams,
    FiniteDifferenceScheme,
    StencilProbabilities,
    analytic_iterations_fd,
    eigendecompose,
    normalize_problem,
    residual_fd,
    s_hat_fd,
    t_sweep_fd,
    transition_probs,
)
from .gll import GLLRule, InvalidOrderError, gll_rule
from .grid import BoxDomain, InvalidDomainError, OutOfDomainError, TensorGrid, build_grid, locate_mesh
from .interpolation import (
    GridFunction,
    interpolate_raw,
    interpolate_truncated,
    interpolation_weights,
)
from .problems import ControlGrid, ControlProblem, discretize_controls, load_problem, test_case
from .semi_lagrangian import (
    SemiLagrangianScheme,
    SLParams,
    analytic_iterations_sl,
    g_operator,
    residual_sl,
    s_hat_sl,
    t_sweep_sl,
)
from .solver import SolveConfig, SolveReport, solve, sup_error

__version__ = "0.1.0"
