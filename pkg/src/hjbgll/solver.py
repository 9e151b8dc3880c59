"""Fixed-point driver: repeated T-sweeps from zero with a choice of stopping rule."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .finite_difference import FDParams, FiniteDifferenceScheme, analytic_iterations_fd, normalize_problem
from .gll import gll_rule
from .grid import TensorGrid, build_grid
from .interpolation import GridFunction
from .problems import ControlProblem, discretize_controls
from .semi_lagrangian import SemiLagrangianScheme, SLParams, analytic_iterations_sl

SCHEMES = ("sl", "fd")
STOPPING = ("diff", "analytic", "residual")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    scheme: str = "sl"
    order: int = 2
    meshes_per_dim: int = 10
    h: float = 0.001
    hhat: Optional[float] = None  # FD only; defaults to h
    controls: int = 2000
    stopping: str = "diff"
    tol: float = 1e-7
    max_iter: int = 100000
    q: Optional[float] = None  # analytic stopping; derived from dx = h^q when omitted
    lam: Optional[float] = None  # analytic stopping; defaults to the problem's sampled min c
    threads: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.stopping not in STOPPING:
            raise ConfigError(f"stopping must be one of {STOPPING}, got {self.stopping!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.meshes_per_dim < 1:
            raise ConfigError("meshes_per_dim must be at least 1")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.controls < 2:
            raise ConfigError("need at least 2 controls")

    @property
    def step_hat(self) -> float:
        return self.h if self.hhat is None else self.hhat


@dataclass(eq=False)
class SolveReport:
    solution: GridFunction
    iterations: int
    final_diff: float
    residual: float
    wall_seconds: float
    sup_error: Optional[float]
    converged: bool
    diff_history: np.ndarray = field(repr=False)
    kappa: float = 1.0


def sup_error(U: GridFunction, exact) -> float:
    """``max_y |U(y) - exact(y)|`` over the grid points."""
    ref = np.asarray(exact(U.grid.point_coords), dtype=float)
    return float(np.max(np.abs(U.values - ref)))


def make_grid(problem: ControlProblem, config: SolveConfig) -> TensorGrid:
    return build_grid(problem.domain, [config.meshes_per_dim] * problem.dim, gll_rule(config.order))


def make_scheme(problem: ControlProblem, config: SolveConfig, grid: Optional[TensorGrid] = None):
    """Return ``(scheme, kappa)``; FD problems are normalized first."""
    grid = grid if grid is not None else make_grid(problem, config)
    cg = discretize_controls(problem, config.controls)
    if config.scheme == "sl":
        return SemiLagrangianScheme(problem, grid, SLParams(config.h, cg)), 1.0
    scaled, kappa = normalize_problem(problem, cg, points=grid.point_coords)
    return FiniteDifferenceScheme(scaled, grid, FDParams(config.h, config.step_hat, cg)), kappa


def analytic_count(scheme, config: SolveConfig) -> int:
    h = config.h
    q = config.q if config.q is not None else math.log(scheme.grid.dx) / math.log(h)
    lam = config.lam if config.lam is not None else scheme.problem.lam
    if config.scheme == "sl":
        return analytic_iterations_sl(q, h, lam)
    return analytic_iterations_fd(q, h, lam)


def solve(problem: ControlProblem, config: SolveConfig, grid: Optional[TensorGrid] = None) -> SolveReport:
    """Iterate ``U <- T U`` from ``U = 0`` until the stopping rule fires or ``max_iter``."""
    start = time.perf_counter()
    with kernels.thread_limit(config.threads):
        scheme, kappa = make_scheme(problem, config, grid)
        n = scheme.grid.npoints
        U = np.zeros(n)
        V = np.empty(n)
        policy = np.empty(n, dtype=np.int64)
        target = analytic_count(scheme, config) if config.stopping == "analytic" else None
        limit = min(target, config.max_iter) if target is not None else config.max_iter
        diffs = []
        converged = False
        diff = math.inf
        it = 0
        while it < limit:
            kernels.sweep(scheme.plan, U, V, policy)
            diff = float(np.max(np.abs(V - U)))
            diffs.append(diff)
            U, V = V, U
            it += 1
            if config.stopping == "diff" and diff <= config.tol:
                converged = True
                break
            if config.stopping == "residual" and scheme.residual(U) <= config.tol:
                converged = True
                break
        if target is not None:
            converged = it == target
        residual = scheme.residual(U)
    solution = GridFunction(scheme.grid, U.copy())
    err = sup_error(solution, problem.exact) if problem.exact is not None else None
    return SolveReport(
        solution=solution,
        iterations=it,
        final_diff=diff,
        residual=residual,
        wall_seconds=time.perf_counter() - start,
        sup_error=err,
        converged=converged,
        diff_history=np.asarray(diffs),
        kappa=kappa,
    )
