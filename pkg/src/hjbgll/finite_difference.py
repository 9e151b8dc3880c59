"""Finite-difference (controlled Markov chain) scheme with truncated GLL interpolation.

The diffusion ``a^a`` must not depend on ``x``. Second-order terms use the
eigen-directions of ``a^a``; first-order terms are upwinded along the axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import TensorGrid
from .interpolation import GridFunction
from .problems import ControlGrid, ControlProblem

# Offsets along eigen-directions are sqrt(2) h so that the central second
# difference with weight d/2 reproduces -tr[a D2u] (a = sigma sigma^T / 2).
DIFFUSION_REACH = math.sqrt(2.0)


class NotPositiveSemidefiniteError(ValueError):
    pass


class NormalizationError(ValueError):
    """A transition probability came out negative: the problem is not normalized."""


class StencilConditionError(ValueError):
    """``h^2 / hhat`` exceeds 1."""


class DiffusionDependsOnXError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    directions: np.ndarray  # columns are unit eigenvectors
    eigenvalues: np.ndarray  # descending, >= 0


@dataclass(frozen=True)
class FDParams:
    h: float
    hhat: float
    control_grid: ControlGrid

    def __post_init__(self):
        if not (self.h > 0 and self.hhat > 0):
            raise ValueError("h and hhat must be positive")
        if self.h**2 / self.hhat > 1.0:
            raise StencilConditionError(f"h^2 / hhat = {self.h ** 2 / self.hhat:.4g} > 1")


@dataclass(frozen=True, eq=False)
class StencilProbabilities:
    offsets: np.ndarray  # (K, N)
    probs: np.ndarray  # (K,)


def eigendecompose(a) -> EigenDecomposition:
    """Eigen-pairs of a symmetric positive semidefinite matrix.

    Eigenvalues are sorted descending (ties keep LAPACK order) and each
    direction is signed so that its first nonzero component is positive.
    Eigenvalues in ``[-1e-12, 0)`` are clamped to zero.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise ValueError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    if np.any(vals < -1e-12):
        raise NotPositiveSemidefiniteError(f"negative eigenvalue {vals.min():.3g}")
    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        lead = col[np.argmax(np.abs(col) > 1e-14)]
        if lead < 0:
            vecs[:, k] = -col
    return EigenDecomposition(directions=vecs, eigenvalues=vals)


def _probabilities(d, xi, b, h: float, hhat: float):
    """Vectorized stencil for drifts ``b`` of shape ``(K, N)``.

    Entry order: stay, then ``+-`` eigen-direction for each ``i``, then
    ``+-`` axis for each ``i``.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    K, N = b.shape
    ratio = h * h / hhat
    if ratio > 1.0:
        raise StencilConditionError(f"h^2 / hhat = {ratio:.4g} > 1")
    ns = 1 + 4 * N
    offsets = np.zeros((K, ns, N))
    probs = np.zeros((K, ns))
    stay = 1.0 - np.sum(d) - ratio * np.sum(np.abs(b), axis=1)
    if np.any(stay < -1e-12):
        raise NormalizationError(
            f"p(x, x) = {stay.min():.3g} < 0: normalize so that sum_i d_i + |b_i| <= 1"
        )
    probs[:, 0] = np.maximum(stay, 0.0)
    for i in range(N):
        reach = DIFFUSION_REACH * h * xi[:, i]
        offsets[:, 1 + 2 * i] = reach
        offsets[:, 2 + 2 * i] = -reach
        probs[:, 1 + 2 * i] = probs[:, 2 + 2 * i] = 0.5 * d[i]
        j = 1 + 2 * N + 2 * i
        offsets[:, j, i] = hhat
        offsets[:, j + 1, i] = -hhat
        probs[:, j] = np.maximum(b[:, i], 0.0) * ratio
        probs[:, j + 1] = np.maximum(-b[:, i], 0.0) * ratio
    return offsets, probs


def transition_probs(decomp: EigenDecomposition, b, params: FDParams) -> StencilProbabilities:
    """Markov-chain transition probabilities at one point with drift ``b``."""
    offsets, probs = _probabilities(decomp.eigenvalues, decomp.directions, b, params.h, params.hhat)
    return StencilProbabilities(offsets=offsets[0], probs=probs[0])


def _lattice(problem: ControlProblem, per_dim: int) -> np.ndarray:
    axes = [np.linspace(l, u, per_dim) for l, u in zip(problem.domain.lower, problem.domain.upper)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.dim)


def check_constant_diffusion(problem: ControlProblem, control_grid: ControlGrid, tol: float = 1e-12):
    """Raise unless ``a^a`` is the same at 9 sampled points for every control."""
    if problem.dim <= 2:
        pts = _lattice(problem, 3)
    else:
        rng = np.random.default_rng(0)
        pts = rng.uniform(problem.domain.lower, problem.domain.upper, size=(9, problem.dim))
    for a in control_grid.values:
        mats = problem.diffusion(a, pts)
        if np.max(np.abs(mats - mats[0])) > tol:
            raise DiffusionDependsOnXError(
                f"{problem.name}: diffusion varies with x at control {a:g}; the finite "
                "difference scheme needs a^a independent of x"
            )


def _decompositions(problem: ControlProblem, controls) -> list:
    centre = 0.5 * (problem.domain.lower + problem.domain.upper)
    return [eigendecompose(problem.diffusion(a, centre)) for a in controls]


def normalize_problem(problem: ControlProblem, control_grid: ControlGrid, points=None):
    """Scale the operator so that ``sup_a sum_i d_i + |b_i| <= 1``.

    ``kappa = max(1, sup)`` is taken over the control grid and a sampling
    lattice (plus ``points`` when given). Returns ``(scaled_problem, kappa)``.
    """
    pts = _lattice(problem, 21)
    if points is not None:
        pts = np.vstack([pts, np.asarray(points, dtype=float).reshape(-1, problem.dim)])

    def bound(prob):
        worst = 0.0
        for a, dec in zip(control_grid.values, _decompositions(prob, control_grid.values)):
            b = np.asarray(prob.drift(a, pts), dtype=float)
            worst = max(worst, float(np.sum(dec.eigenvalues) + np.max(np.sum(np.abs(b), axis=-1))))
        return worst

    kappa = max(1.0, bound(problem))
    if kappa == 1.0:
        return problem, 1.0
    scaled = problem.scaled(kappa)
    if bound(scaled) > 1.0 + 1e-12:
        raise NormalizationError("normalization failed to bound the coefficients")
    return scaled, kappa


def s_hat_fd(problem: ControlProblem, y, t: float, phi, params: FDParams) -> float:
    """``sup_a { -(sum_z p(y, y+z) phi(y+z) - t)/h^2 + c t - f }`` over the control grid."""
    y = np.asarray(y, dtype=float).reshape(1, -1)
    h2 = params.h**2
    best = -np.inf
    for a in params.control_grid.values:
        dec = eigendecompose(problem.diffusion(a, y[0]))
        st = transition_probs(dec, problem.drift(a, y)[0], params)
        e = float(np.dot(st.probs, np.asarray(phi(y + st.offsets), dtype=float)))
        c = float(problem.discount(a, y)[0])
        f = float(problem.source(a, y)[0])
        best = max(best, -(e - t) / h2 + c * t - f)
    return best


class FiniteDifferenceScheme:
    """Fixed-point map ``T`` and residual of the FD scheme on one grid.

    ``problem`` must already be normalized (see :func:`normalize_problem`);
    a violation surfaces as :class:`NormalizationError` while tabulating.
    """

    name = "fd"

    def __init__(self, problem: ControlProblem, grid: TensorGrid, params: FDParams):
        if problem.dim != grid.dim:
            raise ValueError("problem and grid dimensions differ")
        check_constant_diffusion(problem, params.control_grid)
        self.problem, self.grid, self.params = problem, grid, params
        h2 = params.h**2
        decs = dict(zip(params.control_grid.values.tolist(), _decompositions(problem, params.control_grid.values)))

        def stencil(a, x):
            dec = decs[a]
            b = np.asarray(problem.drift(a, x), dtype=float)
            offsets, prob = _probabilities(dec.eigenvalues, dec.directions, b, params.h, params.hhat)
            c = np.broadcast_to(problem.discount(a, x), x.shape[:1]).astype(float)
            f = np.broadcast_to(problem.source(a, x), x.shape[:1]).astype(float)
            scale = 1.0 / (1.0 + h2 * c)
            return offsets, prob, scale, h2 * f * scale, np.ones_like(c), c, f

        self.plan = kernels.build_plan(grid, problem, params.control_grid.values, stencil, step=h2)

    @property
    def step(self) -> float:
        return self.params.h**2

    def sweep_values(self, U: np.ndarray, out=None):
        return kernels.sweep(self.plan, U, out)

    def sweep(self, U: GridFunction) -> GridFunction:
        out, _ = kernels.sweep(self.plan, kernels.as_values(U))
        return GridFunction(self.grid, out)

    def scheme_values(self, U) -> np.ndarray:
        return kernels.scheme_values(self.plan, kernels.as_values(U))

    def residual(self, U) -> float:
        return float(np.max(np.abs(self.scheme_values(U))))


def t_sweep_fd(problem: ControlProblem, params: FDParams, U: GridFunction) -> GridFunction:
    """``(T U)(x) = min_a (sum_z p Ihat U(x+z) + h^2 f) / (1 + h^2 c)`` at every grid point."""
    return FiniteDifferenceScheme(problem, U.grid, params).sweep(U)


def residual_fd(problem: ControlProblem, params: FDParams, U: GridFunction) -> float:
    return FiniteDifferenceScheme(problem, U.grid, params).residual(U)


def analytic_iterations_fd(q: float, h: float, lam: float) -> int:
    """Smallest integer ``k >= -(q - 2) log h / log(1 + lam h^2)``, at least 1."""
    if not 0 < h < 1:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if not q > 2:
        raise ValueError(f"q must exceed 2, got {q}")
    return max(1, math.ceil(-(q - 2) * math.log(h) / math.log(1 + lam * h * h)))
