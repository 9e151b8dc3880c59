"""Box domains and tensor meshes carrying GLL points in every mesh."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .gll import GLLRule

_DX_RTOL = 1e-12
_LOCATE_TOL = 1e-9


class InvalidDomainError(ValueError):
    pass


class OutOfDomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoxDomain:
    """The box ``Q = [lower_1, upper_1] x ... x [lower_N, upper_N]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise InvalidDomainError("lower and upper must be vectors of one common length")
        if not np.all(lower < upper):
            raise InvalidDomainError(f"empty box: lower={lower}, upper={upper}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 0.0):
        """Boolean mask of points (last axis = coordinates) inside the closed box."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Uniform hypercube meshes of side ``dx``, each carrying ``(M+1)^N`` GLL points.

    Global points are the tensor product of the 1-D point lines, so the
    endpoints shared by adjacent meshes are stored once. Point and mesh ids
    are row-major (last dimension fastest).
    """

    domain: BoxDomain
    meshes_per_dim: tuple
    dx: float
    rule: GLLRule
    lines: tuple = field(repr=False)
    point_coords: np.ndarray = field(repr=False)
    mesh_to_points: np.ndarray = field(repr=False)
    local_index: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def order(self) -> int:
        return self.rule.order

    @property
    def npoints(self) -> int:
        return self.point_coords.shape[0]

    @property
    def nmeshes(self) -> int:
        return self.mesh_to_points.shape[0]

    @property
    def points_per_dim(self) -> tuple:
        return tuple(len(line) for line in self.lines)

    def mesh_id(self, index) -> int:
        return int(np.ravel_multi_index(tuple(index), self.meshes_per_dim))

    def mesh_index(self, mesh_id: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(mesh_id, self.meshes_per_dim))

    def mesh_bounds(self, index):
        lo = self.domain.lower + self.dx * np.asarray(index, dtype=float)
        return lo, lo + self.dx

    def locate(self, x, check: bool = True):
        """Vectorized cell lookup.

        Returns ``(mesh_ids, s)`` where ``s`` holds the local coordinates in
        [-1, 1] of every point inside its mesh. Cells are half-open with the
        topmost cell closed; points within ``dx * 1e-9`` of the box are
        snapped onto it.
        """
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, self.dim)
        lower, upper = self.domain.lower, self.domain.upper
        tol = self.dx * _LOCATE_TOL
        if check and not np.all(self.domain.contains(pts, tol)):
            bad = pts[~self.domain.contains(pts, tol)][0]
            raise OutOfDomainError(f"point {bad} lies outside the domain")
        pts = np.clip(pts, lower, upper)
        rel = (pts - lower) / self.dx
        counts = np.asarray(self.meshes_per_dim)
        idx = np.clip(np.floor(rel).astype(np.int64), 0, counts - 1)
        s = 2.0 * (rel - idx) - 1.0
        ids = np.ravel_multi_index(tuple(idx.T), self.meshes_per_dim)
        return ids.reshape(x.shape[:-1]), s.reshape(x.shape)


def build_grid(domain: BoxDomain, meshes_per_dim, rule: GLLRule) -> TensorGrid:
    """Mesh ``domain`` with ``meshes_per_dim`` cells per direction (common ``dx``)."""
    N = domain.dim
    counts = np.broadcast_to(np.asarray(meshes_per_dim), (N,))
    if np.any(counts != np.round(counts)) or np.any(counts < 1):
        raise InvalidDomainError(f"mesh counts must be positive integers, got {meshes_per_dim!r}")
    counts = tuple(int(c) for c in counts)
    widths = (domain.upper - domain.lower) / np.asarray(counts, dtype=float)
    dx = float(widths[0])
    if np.any(np.abs(widths - dx) > _DX_RTOL * dx):
        raise InvalidDomainError(f"mesh spacing differs across dimensions: {widths}")

    M = rule.order
    xi = rule.nodes
    lines = []
    for k in range(N):
        cells = np.repeat(np.arange(counts[k], dtype=float), M)
        local = np.tile(0.5 * (1.0 + xi[:-1]), counts[k])
        line = np.append(domain.lower[k] + dx * (cells + local), domain.lower[k] + dx * counts[k])
        line.setflags(write=False)
        lines.append(line)

    mesh_grid = np.stack(np.meshgrid(*lines, indexing="ij"), axis=-1)
    point_coords = np.ascontiguousarray(mesh_grid.reshape(-1, N))
    point_coords.setflags(write=False)

    shape = tuple(c * M + 1 for c in counts)
    local_index = np.array(list(itertools.product(range(M + 1), repeat=N)), dtype=np.int64)
    mesh_multi = np.array(list(itertools.product(*(range(c) for c in counts))), dtype=np.int64)
    global_multi = mesh_multi[:, None, :] * M + local_index[None, :, :]
    mesh_to_points = np.ravel_multi_index(tuple(np.moveaxis(global_multi, -1, 0)), shape)
    mesh_to_points = np.ascontiguousarray(mesh_to_points, dtype=np.int64)
    mesh_to_points.setflags(write=False)
    local_index.setflags(write=False)
    return TensorGrid(
        domain=domain,
        meshes_per_dim=counts,
        dx=dx,
        rule=rule,
        lines=tuple(lines),
        point_coords=point_coords,
        mesh_to_points=mesh_to_points,
        local_index=local_index,
    )


def locate_mesh(grid: TensorGrid, x) -> tuple:
    """Multi-index of the mesh containing the single point ``x``."""
    x = np.asarray(x, dtype=float).reshape(grid.dim)
    ids, _ = grid.locate(x)
    return grid.mesh_index(int(ids))
