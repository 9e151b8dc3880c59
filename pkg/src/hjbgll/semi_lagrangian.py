"""Semi-Lagrangian scheme with truncated GLL interpolation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .grid import TensorGrid
from .interpolation import GridFunction
from .problems import ControlGrid, ControlProblem


class StepTooLargeError(ValueError):
    """``h * c`` reached 1, so the discount factor ``1 - h c`` is no longer positive."""


@dataclass(frozen=True)
class SLParams:
    h: float
    control_grid: ControlGrid
    q: Optional[float] = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.q is not None and not self.q > 2:
            raise ValueError(f"q must exceed 2, got {self.q}")

    def check_grid(self, grid: TensorGrid) -> None:
        if self.q is not None and abs(grid.dx - self.h**self.q) > 1e-9 * self.h**self.q:
            raise ValueError(f"grid spacing {grid.dx} differs from h^q = {self.h ** self.q}")


def _check_step(h: float, c) -> None:
    if np.any(h * np.asarray(c) >= 1.0):
        raise StepTooLargeError(f"h * c reaches {float(np.max(h * np.asarray(c))):.4g} >= 1; reduce h")


def _sample_offsets(problem: ControlProblem, a: float, x: np.ndarray, h: float) -> np.ndarray:
    """``h b + sqrt(hP) sigma_i`` and ``h b - sqrt(hP) sigma_i``, i = 1..P, per point."""
    P = problem.noise_dim
    drift = h * np.asarray(problem.drift(a, x), dtype=float)  # (K, N)
    spread = math.sqrt(h * P) * np.asarray(problem.sigma(a, x), dtype=float)  # (K, N, P)
    cols = np.moveaxis(spread, -1, -2)  # (K, P, N)
    offsets = np.empty(x.shape[:-1] + (2 * P, x.shape[-1]))
    offsets[..., 0::2, :] = drift[..., None, :] + cols
    offsets[..., 1::2, :] = drift[..., None, :] - cols
    return offsets


def g_operator(problem: ControlProblem, a: float, y, phi, h: float) -> float:
    """``(1 - h c)/(2P) * sum_i phi(y + h b +- sqrt(hP) sigma_i)`` at one point ``y``.

    ``phi`` maps sample points ``(K, N)`` to values ``(K,)``.
    """
    y = np.asarray(y, dtype=float).reshape(1, -1)
    c = float(problem.discount(a, y)[0])
    _check_step(h, c)
    samples = y + _sample_offsets(problem, a, y, h)[0]
    vals = np.asarray(phi(samples), dtype=float)
    return (1.0 - h * c) / (2 * problem.noise_dim) * float(np.sum(vals))


def s_hat_sl(problem: ControlProblem, y, t: float, phi, h: float, control_grid: ControlGrid) -> float:
    """``sup_a { -(G - t)/h + c t - f }`` over the control grid, without interpolation."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    best = -np.inf
    for a in control_grid.values:
        g = g_operator(problem, a, y[0], phi, h)
        c = float(problem.discount(a, y)[0])
        f = float(problem.source(a, y)[0])
        best = max(best, -(g - t) / h + c * t - f)
    return best


class SemiLagrangianScheme:
    """Fixed-point map ``T`` and residual of the SL scheme on one grid.

    Building the object tabulates every sample point once (memory grows as
    grid points x controls x 2P); ``sweep`` and ``scheme_values`` then run
    compiled loops.
    """

    name = "sl"

    def __init__(self, problem: ControlProblem, grid: TensorGrid, params: SLParams):
        if problem.dim != grid.dim:
            raise ValueError("problem and grid dimensions differ")
        params.check_grid(grid)
        self.problem, self.grid, self.params = problem, grid, params
        h = params.h
        P = problem.noise_dim

        def stencil(a, x):
            c = np.broadcast_to(problem.discount(a, x), x.shape[:1]).astype(float)
            _check_step(h, c)
            f = np.broadcast_to(problem.source(a, x), x.shape[:1]).astype(float)
            offsets = _sample_offsets(problem, a, x, h)
            prob = np.full(offsets.shape[:2], 1.0 / (2 * P))
            disc = 1.0 - h * c
            return offsets, prob, disc, h * f, disc, c, f

        self.plan = kernels.build_plan(grid, problem, params.control_grid.values, stencil, step=h)

    @property
    def step(self) -> float:
        return self.params.h

    def sweep_values(self, U: np.ndarray, out=None):
        return kernels.sweep(self.plan, U, out)

    def sweep(self, U: GridFunction) -> GridFunction:
        out, _ = kernels.sweep(self.plan, kernels.as_values(U))
        return GridFunction(self.grid, out)

    def scheme_values(self, U) -> np.ndarray:
        return kernels.scheme_values(self.plan, kernels.as_values(U))

    def residual(self, U) -> float:
        return float(np.max(np.abs(self.scheme_values(U))))


def t_sweep_sl(problem: ControlProblem, params: SLParams, U: GridFunction) -> GridFunction:
    """``(T U)(x) = min_a (1 - h c) Pi U(x) + h f`` at every grid point."""
    return SemiLagrangianScheme(problem, U.grid, params).sweep(U)


def residual_sl(problem: ControlProblem, params: SLParams, U: GridFunction) -> float:
    """``max_y |S(h, y, U(y), [Ihat U]_y)|``: the epsilon for which ``U`` is an epsilon-solution."""
    return SemiLagrangianScheme(problem, U.grid, params).residual(U)


def analytic_iterations_sl(q: float, h: float, lam: float) -> int:
    """Smallest integer ``k >= (q - 1) log h / log(1 - lam h)``, at least 1."""
    if not 0 < h < 1:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    if not lam > 0 or lam * h >= 1:
        raise ValueError(f"need 0 < lam h < 1, got lam h = {lam * h}")
    if not q > 1:
        raise ValueError(f"q must exceed 1, got {q}")
    return max(1, math.ceil((q - 1) * math.log(h) / math.log(1 - lam * h)))
