"""Tensor Lagrange interpolation on GLL meshes and its truncated (clamped) form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gll import GLLRule, legendre_eval
from .grid import TensorGrid

NODE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class GridFunction:
    """One real value per global grid point."""

    grid: TensorGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.npoints,):
            raise ValueError(f"expected {self.grid.npoints} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TensorGrid, func) -> "GridFunction":
        """Sample ``func`` (points of shape ``(K, N)`` -> ``(K,)``) at every grid point."""
        return cls(grid, np.broadcast_to(func(grid.point_coords), (grid.npoints,)).copy())

    @classmethod
    def constant(cls, grid: TensorGrid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.npoints, float(value)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + float(other))

    def mesh_extremes(self):
        """Per-mesh minimum and maximum of the nodal values."""
        nodal = self.values[self.grid.mesh_to_points]
        return nodal.min(axis=1), nodal.max(axis=1)


def barycentric_weights(rule: GLLRule) -> np.ndarray:
    x = rule.nodes
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def lagrange_basis(rule: GLLRule, s) -> np.ndarray:
    """Values of the ``M + 1`` GLL Lagrange polynomials at local coordinates ``s``.

    Output shape is ``s.shape + (M + 1,)``. Points within ``1e-13`` of a node
    get the exact unit vector.
    """
    s = np.asarray(s, dtype=float)
    nodes = rule.nodes
    lam = barycentric_weights(rule)
    diff = s[..., None] - nodes
    close = np.abs(diff) <= NODE_TOL
    on_node = close.any(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = lam / diff
        basis = q / q.sum(axis=-1, keepdims=True)
    if np.any(on_node):
        hit = np.argmin(np.abs(diff), axis=-1)
        onehot = (np.arange(nodes.size) == hit[..., None]).astype(float)
        basis = np.where(on_node[..., None], onehot, basis)
    return basis


def tensor_weights(grid: TensorGrid, s) -> np.ndarray:
    """Tensor-product weights ``(K, (M+1)^N)`` for local coordinates ``s`` of shape ``(K, N)``."""
    s = np.asarray(s, dtype=float).reshape(-1, grid.dim)
    basis = lagrange_basis(grid.rule, s)  # (K, N, M+1)
    li = grid.local_index
    w = basis[:, 0, li[:, 0]]
    for d in range(1, grid.dim):
        w = w * basis[:, d, li[:, d]]
    return w


def _prepare(u: GridFunction, x, mesh):
    grid = u.grid
    x = np.asarray(x, dtype=float)
    scalar = x.ndim <= 1
    pts = x.reshape(-1, grid.dim)
    if mesh is None:
        ids, s = grid.locate(pts)
    else:
        mid = grid.mesh_id(mesh)
        lo, _ = grid.mesh_bounds(grid.mesh_index(mid))
        s = 2.0 * (pts - lo) / grid.dx - 1.0
        if np.any(np.abs(s) > 1.0 + 1e-9):
            raise ValueError(f"point outside the requested mesh {tuple(mesh)}")
        s = np.clip(s, -1.0, 1.0)
        ids = np.full(pts.shape[0], mid)
    nodal = u.values[grid.mesh_to_points[ids]]  # (K, nloc)
    w = tensor_weights(grid, s)
    return scalar, ids, nodal, w


def _shape(values, scalar):
    return float(values[0]) if scalar else values


def interpolate_raw(u: GridFunction, x, mesh=None):
    """Untruncated tensor Lagrange interpolant of ``u`` at ``x``.

    ``x`` is one point ``(N,)`` or a batch ``(K, N)`` inside the domain.
    ``mesh`` forces evaluation through a given mesh multi-index (for points
    on a shared face); by default the owning mesh is located.
    """
    scalar, _, nodal, w = _prepare(u, x, mesh)
    return _shape(np.einsum("kt,kt->k", w, nodal), scalar)


def interpolate_truncated(u: GridFunction, x, mesh=None):
    """Interpolant clamped to the range of the nodal values of its mesh."""
    scalar, _, nodal, w = _prepare(u, x, mesh)
    raw = np.einsum("kt,kt->k", w, nodal)
    out = np.minimum(np.maximum(raw, nodal.min(axis=1)), nodal.max(axis=1))
    return _shape(out, scalar)


def interpolation_weights(u: GridFunction, x, mesh=None):
    """Nonnegative weights reproducing the truncated interpolant at one point.

    Returns ``[(point_id, weight), ...]`` over the points of the mesh that
    holds ``x``. Only an extremal pair (or a single clamping node) carries
    mass; ties among extremal nodes go to the lowest point id.
    """
    scalar, ids, nodal, w = _prepare(u, x, mesh)
    if not scalar:
        raise ValueError("interpolation_weights takes a single point")
    pts = u.grid.mesh_to_points[ids[0]]
    vals = nodal[0]
    raw = float(np.dot(w[0], vals))
    lo, hi = vals.min(), vals.max()
    order = np.argsort(pts, kind="stable")
    i_lo = order[np.argmax(vals[order] == lo)]
    i_hi = order[np.argmax(vals[order] == hi)]
    weights = np.zeros(pts.size)
    if raw <= lo or lo == hi:
        weights[i_lo] = 1.0
    elif raw >= hi:
        weights[i_hi] = 1.0
    else:
        w_lo = (raw - hi) / (lo - hi)
        weights[i_lo] = w_lo
        weights[i_hi] = 1.0 - w_lo
    return [(int(p), float(wt)) for p, wt in zip(pts, weights)]


def modal_interpolate_1d(rule: GLLRule, values, s) -> np.ndarray:
    """1-D GLL interpolant through Legendre coefficients on [-1, 1].

    ``f_k = sum_i rho_i f(eta_i) L_k(eta_i) / gamma_k`` with the discrete norms
    ``gamma_k = sum_i rho_i L_k(eta_i)^2``, ``k = 0..M``. Independent of the
    barycentric route used everywhere else.
    """
    values = np.asarray(values, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    for k in range(rule.order + 1):
        Lk_nodes, _ = legendre_eval(k, rule.nodes)
        gamma = np.sum(rule.weights * Lk_nodes**2)
        coef = np.sum(rule.weights * values * Lk_nodes) / gamma
        Lk, _ = legendre_eval(k, s)
        out = out + coef * Lk
    return out


def extended(u: GridFunction, boundary):
    """``phi(x)``: truncated interpolant of ``u`` inside the box, ``boundary(x)`` outside.

    ``boundary`` takes points ``(K, N)``. Works on one point or a batch.
    """
    domain = u.grid.domain

    def phi(x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, domain.dim)
        inside = domain.contains(pts)
        out = np.empty(pts.shape[0])
        if np.any(inside):
            out[inside] = interpolate_truncated(u, pts[inside])
        if np.any(~inside):
            out[~inside] = boundary(pts[~inside])
        return float(out[0]) if x.ndim == 1 else out

    return phi
