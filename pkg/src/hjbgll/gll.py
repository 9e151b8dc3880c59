"""Legendre polynomials and Gauss-Lobatto-Legendre (GLL) quadrature rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_ORDER = 32


class InvalidOrderError(ValueError):
    """Raised for a GLL order outside ``1..MAX_ORDER``."""


@dataclass(frozen=True, eq=False)
class GLLRule:
    """GLL nodes and weights of order ``M`` on [-1, 1] (``M + 1`` points)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return self.order + 1

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def legendre_eval(n: int, x):
    """Return ``(L_n(x), L_n'(x))`` from the three-term recurrence.

    ``x`` may be a scalar or an array and is not restricted to [-1, 1].
    The derivative uses ``L'_{k+1} = L'_{k-1} + (2k + 1) L_k``.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    d_prev, d = np.zeros_like(x), np.ones_like(x)
    if n == 0:
        return _out(p_prev), _out(d_prev)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return _out(p), _out(d)


def _legendre_d2(n: int, x: np.ndarray):
    """``(L_n', L_n'')`` for the Newton polish on ``L_n'``."""
    p_prev, p = np.ones_like(x), x.copy()
    d_prev, d = np.zeros_like(x), np.ones_like(x)
    s_prev, s = np.zeros_like(x), np.zeros_like(x)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = d_prev + (2 * k + 1) * p
        s_next = s_prev + (2 * k + 1) * d
        p_prev, p = p, p_next
        d_prev, d = d, d_next
        s_prev, s = s, s_next
    return d, s


def _out(a: np.ndarray):
    return float(a) if a.ndim == 0 else a


def _interior_newton(M: int) -> np.ndarray:
    # Chebyshev-Gauss-Lobatto guesses, ascending
    x = -np.cos(np.pi * np.arange(1, M) / M)
    for _ in range(100):
        d1, d2 = _legendre_d2(M, x)
        step = d1 / d2
        x = x - step
        if np.max(np.abs(step)) < 1e-14:
            break
    return x


def _interior_eig(M: int) -> np.ndarray:
    # zeros of L'_M as eigenvalues of the symmetric tridiagonal Jacobi matrix
    from scipy.linalg import eigh_tridiagonal

    n = np.arange(1, M - 1, dtype=float)
    gamma = 0.5 * np.sqrt(n * (n + 2) / ((n + 0.5) * (n + 1.5)))
    return np.sort(eigh_tridiagonal(np.zeros(M - 1), gamma, eigvals_only=True))


@lru_cache(maxsize=None)
def _build(M: int, method: str) -> GLLRule:
    if M > 1:
        inner = _interior_newton(M) if method == "newton" else _interior_eig(M)
        inner = 0.5 * (inner - inner[::-1])
    else:
        inner = np.empty(0)
    nodes = np.concatenate(([-1.0], inner, [1.0]))
    L, _ = legendre_eval(M, nodes)
    weights = 2.0 / ((M + 1) * M * L**2)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return GLLRule(order=M, nodes=nodes, weights=weights)


def gll_rule(M: int, method: str = "newton") -> GLLRule:
    """GLL rule of order ``M``: nodes ``{-1} U {zeros of L_M'} U {+1}``.

    Weights are ``2 / ((M + 1) M L_M(node)^2)``. ``method="eig"`` solves the
    tridiagonal eigenproblem instead of Newton polishing (needs scipy).
    """
    if isinstance(M, bool) or int(M) != M or not 1 <= M <= MAX_ORDER:
        raise InvalidOrderError(f"GLL order must be an integer in 1..{MAX_ORDER}, got {M!r}")
    if method not in ("newton", "eig"):
        raise ValueError(f"unknown node method {method!r}")
    return _build(int(M), method)
