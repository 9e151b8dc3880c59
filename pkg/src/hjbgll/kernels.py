"""Precomputed sample plans and the compiled Jacobi sweep / residual kernels.

Both schemes have the same shape: for every grid point ``x`` and control
``a`` a fixed set of sample points ``x + z`` with probabilities ``p`` is
evaluated through the truncated interpolant (or the Dirichlet data outside
the box), giving ``E = sum_z p(z) Ihat U(x + z)``. Then

    T U(x)   = min_a  tA(x, a) * E + tB(x, a)
    S(x, t)  = max_a -(gA(x, a) * E - t) / step + c(x, a) t - f(x, a)

Sample locations never change between sweeps, so mesh ids and tensor
Lagrange weights are computed once. Every grid point is computed
independently from the previous iterate, hence results do not depend on the
number of threads.
"""

from __future__ import annotations

import contextlib
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .grid import TensorGrid
from .interpolation import GridFunction, tensor_weights

# numba falls back to the omp/workqueue layer when TBB is too old; the notice is noise here
warnings.filterwarnings("ignore", message="The TBB threading layer", category=numba.NumbaWarning)


@dataclass(eq=False)
class SweepPlan:
    grid: TensorGrid
    controls: np.ndarray
    mesh: np.ndarray  # (npts, nctrl, ns) int64, -1 = outside the box
    weights: np.ndarray  # (npts, nctrl, ns, (M+1)^N) tensor Lagrange weights on the sample's mesh
    outside: np.ndarray  # (npts, nctrl, ns) Dirichlet values (0 inside)
    prob: np.ndarray  # (npts, nctrl, ns)
    t_scale: np.ndarray  # (npts, nctrl)
    t_shift: np.ndarray  # (npts, nctrl)
    g_scale: np.ndarray  # (npts, nctrl)
    disc: np.ndarray  # (npts, nctrl) c
    src: np.ndarray  # (npts, nctrl) f
    step: float

    @property
    def nbytes(self) -> int:
        return sum(getattr(self, k).nbytes for k in ("mesh", "weights", "outside", "prob"))


def build_plan(grid: TensorGrid, problem, controls, stencil, step: float) -> SweepPlan:
    """Tabulate samples for every (grid point, control).

    ``stencil(a, x)`` returns ``(offsets, prob, t_scale, t_shift, g_scale, c, f)``
    for all grid points ``x`` at control ``a``; ``offsets`` has shape
    ``(npts, ns, N)`` and ``prob`` ``(npts, ns)``.
    """
    x = grid.point_coords
    npts, N = x.shape
    M = grid.order
    controls = np.asarray(controls, dtype=float)
    nctrl = controls.size
    mesh = t_scale = None
    for j, a in enumerate(controls):
        offsets, prob, ts, tb, gs, c, f = stencil(float(a), x)
        ns = offsets.shape[1]
        if mesh is None:
            mesh = np.empty((npts, nctrl, ns), dtype=np.int64)
            weights = np.zeros((npts, nctrl, ns, (M + 1) ** N))
            outside = np.zeros((npts, nctrl, ns))
            probs = np.empty((npts, nctrl, ns))
            t_scale = np.empty((npts, nctrl))
            t_shift = np.empty((npts, nctrl))
            g_scale = np.empty((npts, nctrl))
            disc = np.empty((npts, nctrl))
            src = np.empty((npts, nctrl))
        pos = (x[:, None, :] + offsets).reshape(-1, N)
        inside = grid.domain.contains(pos)
        ids = np.full(pos.shape[0], -1, dtype=np.int64)
        w = np.zeros((pos.shape[0], (M + 1) ** N))
        vals = np.zeros(pos.shape[0])
        if np.any(inside):
            mid, s = grid.locate(pos[inside], check=False)
            ids[inside] = mid
            w[inside] = tensor_weights(grid, s)
        if np.any(~inside):
            vals[~inside] = problem.dirichlet(pos[~inside])
        mesh[:, j] = ids.reshape(npts, ns)
        weights[:, j] = w.reshape(npts, ns, -1)
        outside[:, j] = vals.reshape(npts, ns)
        probs[:, j] = prob
        t_scale[:, j] = ts
        t_shift[:, j] = tb
        g_scale[:, j] = gs
        disc[:, j] = c
        src[:, j] = f
    return SweepPlan(grid, controls, mesh, weights, outside, probs, t_scale, t_shift, g_scale, disc, src, float(step))


@njit(parallel=True, cache=True)
def _mesh_extremes(U, mesh_pts):
    nm, nloc = mesh_pts.shape
    lo = np.empty(nm)
    hi = np.empty(nm)
    for m in prange(nm):
        a = U[mesh_pts[m, 0]]
        b = a
        for t in range(1, nloc):
            v = U[mesh_pts[m, t]]
            if v < a:
                a = v
            if v > b:
                b = v
        lo[m] = a
        hi[m] = b
    return lo, hi


@njit(inline="always")
def _expectation(U, mesh_pts, lo, hi, mesh, weights, outside, prob, p, a):
    ns = mesh.shape[2]
    nloc = weights.shape[3]
    acc = 0.0
    for s in range(ns):
        pr = prob[p, a, s]
        if pr == 0.0:
            continue
        m = mesh[p, a, s]
        if m < 0:
            v = outside[p, a, s]
        else:
            raw = 0.0
            for t in range(nloc):
                raw += weights[p, a, s, t] * U[mesh_pts[m, t]]
            v = min(max(raw, lo[m]), hi[m])
        acc += pr * v
    return acc


@njit(parallel=True, cache=True)
def _sweep(U, mesh_pts, mesh, weights, outside, prob, t_scale, t_shift, out, policy):
    lo, hi = _mesh_extremes(U, mesh_pts)
    npts, nctrl = t_scale.shape
    for p in prange(npts):
        best = np.inf
        arg = 0
        for a in range(nctrl):
            e = _expectation(U, mesh_pts, lo, hi, mesh, weights, outside, prob, p, a)
            val = t_scale[p, a] * e + t_shift[p, a]
            if val < best:
                best = val
                arg = a
        out[p] = best
        policy[p] = arg


@njit(parallel=True, cache=True)
def _residual(U, mesh_pts, mesh, weights, outside, prob, g_scale, disc, src, step, out):
    lo, hi = _mesh_extremes(U, mesh_pts)
    npts, nctrl = g_scale.shape
    for p in prange(npts):
        t = U[p]
        best = -np.inf
        for a in range(nctrl):
            e = _expectation(U, mesh_pts, lo, hi, mesh, weights, outside, prob, p, a)
            val = -(g_scale[p, a] * e - t) / step + disc[p, a] * t - src[p, a]
            if val > best:
                best = val
        out[p] = best


def sweep(plan: SweepPlan, U: np.ndarray, out: np.ndarray | None = None, policy: np.ndarray | None = None):
    """One application of ``T``; writes into ``out`` (fresh array by default)."""
    if out is None:
        out = np.empty_like(U)
    if policy is None:
        policy = np.empty(U.shape[0], dtype=np.int64)
    g = plan.grid
    _sweep(U, g.mesh_to_points, plan.mesh, plan.weights, plan.outside, plan.prob,
           plan.t_scale, plan.t_shift, out, policy)
    return out, policy


def scheme_values(plan: SweepPlan, U: np.ndarray) -> np.ndarray:
    """Pointwise scheme value ``S(h, y, U(y), [Ihat U]_y)`` at every grid point."""
    out = np.empty_like(U)
    g = plan.grid
    _residual(U, g.mesh_to_points, plan.mesh, plan.weights, plan.outside, plan.prob,
              plan.g_scale, plan.disc, plan.src, plan.step, out)
    return out


def as_values(U) -> np.ndarray:
    return np.ascontiguousarray(U.values if isinstance(U, GridFunction) else U, dtype=float)


@contextlib.contextmanager
def thread_limit(threads: int | None):
    """Run the kernels with at most ``threads`` worker threads (``None`` = all)."""
    previous = numba.get_num_threads()
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(previous)
