"""Stationary HJB problem data and the four benchmark cases.

A problem is ``sup_a { -tr[a^a(x) D2u] - b^a(x).Du + c^a(x) u - f^a(x) } = 0``
with ``a^a = sigma^a (sigma^a)^T / 2``, a scalar control ``a`` in a closed
interval and a box domain. Coefficient callables are vectorized over points:
they take the control (a float) and ``x`` of shape ``(..., N)`` and return
arrays of shape ``(..., N, P)`` (sigma), ``(..., N)`` (b) or ``(...)`` (c, f).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .expressions import ExpressionError, compile_expression
from .grid import BoxDomain

PI = np.pi


class ProblemError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControlProblem:
    name: str
    dim: int
    noise_dim: int
    sigma: Callable
    drift: Callable
    discount: Callable
    source: Callable
    control_set: tuple
    domain: BoxDomain
    dirichlet: Callable
    exact: Optional[Callable] = None
    lam: float = field(default=float("nan"))

    def __post_init__(self):
        lo, hi = (float(v) for v in self.control_set)
        if not lo <= hi:
            raise ProblemError(f"empty control set {self.control_set}")
        object.__setattr__(self, "control_set", (lo, hi))
        if self.domain.dim != self.dim:
            raise ProblemError("domain dimension does not match the problem dimension")
        if self.noise_dim < 1:
            raise ProblemError("sigma needs at least one column")
        if np.isnan(self.lam):
            object.__setattr__(self, "lam", self._sampled_lambda())
        if not self.lam > 0.0:
            raise ProblemError(f"{self.name}: discount must stay positive, sampled min is {self.lam:g}")

    def _sampled_lambda(self, n: int = 50) -> float:
        per_dim = max(2, int(round((n * n) ** (1.0 / self.dim))))
        axes = [np.linspace(l, u, per_dim) for l, u in zip(self.domain.lower, self.domain.upper)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        lo, hi = self.control_set
        lam = np.inf
        for a in np.linspace(lo, hi, n):
            lam = min(lam, float(np.min(np.broadcast_to(self.discount(a, pts), pts.shape[:1]))))
        return lam

    def diffusion(self, a: float, x) -> np.ndarray:
        """``a^a(x) = sigma sigma^T / 2``."""
        s = self.sigma(a, np.asarray(x, dtype=float))
        return 0.5 * s @ np.swapaxes(s, -1, -2)

    def scaled(self, kappa: float, name: Optional[str] = None) -> "ControlProblem":
        """Divide the operator by ``kappa``: sigma / sqrt(kappa) and b, c, f / kappa.

        The solution set is unchanged.
        """
        k = float(kappa)
        root = np.sqrt(k)
        s, b, c, f = self.sigma, self.drift, self.discount, self.source
        return replace(
            self,
            name=name or self.name,
            sigma=lambda a, x: s(a, x) / root,
            drift=lambda a, x: b(a, x) / k,
            discount=lambda a, x: c(a, x) / k,
            source=lambda a, x: f(a, x) / k,
            lam=self.lam / k,
        )


@dataclass(frozen=True)
class ControlGrid:
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def discretize_controls(problem: ControlProblem, count: int) -> ControlGrid:
    """Uniform grid of ``count`` controls over the control interval, endpoints included."""
    if int(count) != count or count < 2:
        raise ProblemError(f"need at least two controls, got {count!r}")
    lo, hi = problem.control_set
    values = lo + np.arange(count) * ((hi - lo) / (count - 1))
    values[-1] = hi
    values.setflags(write=False)
    return ControlGrid(values)


# -- benchmark cases ---------------------------------------------------------


def _xy(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


def _sinsin(x):
    X, Y = _xy(x)
    return np.sin(PI * X) * np.sin(PI * Y)


def sup_quadratic(q0, q1, q2, lo: float, hi: float):
    """Exact ``max_{t in [lo, hi]} q0 + q1 t + q2 t^2`` (elementwise).

    Candidates are the endpoints and the stationary point when it is inside.
    """
    q0, q1, q2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (q0, q1, q2)))

    def val(t):
        return q0 + q1 * t + q2 * t * t

    best = np.maximum(val(lo), val(hi))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t_star = np.where(q2 != 0.0, -q1 / (2.0 * q2), np.nan)
    inside = (t_star >= lo) & (t_star <= hi)
    return np.where(inside, np.maximum(best, val(np.where(inside, t_star, lo))), best)


def _k_max(phi, a_tilde, extra=(), lo=-1.0, hi=1.0):
    """Max of ``phi`` over the endpoints and the listed interior candidates."""
    best = np.maximum(phi(lo), phi(hi))
    for cand in (a_tilde,) + tuple(extra):
        ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
        best = np.where(ok, np.maximum(best, phi(np.where(ok, cand, lo))), best)
    return best


def _case1(as_printed: bool) -> ControlProblem:
    sig, b, C = 1.0, 0.3, 0.55

    def sigma(a, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(sig * a * np.eye(2), x.shape[:-1] + (2, 2))

    def drift(a, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, b)

    def discount(a, x):
        return np.full(np.shape(x)[:-1], C)

    def source(a, x):
        X, Y = _xy(x)
        u = np.sin(PI * X) * np.sin(PI * Y)
        grad = np.cos(PI * X) * np.sin(PI * Y) + np.sin(PI * X) * np.cos(PI * Y)
        return (C + PI**2 * sig**2 * (u > 0)) * u - b * PI * grad

    return ControlProblem(
        name="case1",
        dim=2,
        noise_dim=2,
        sigma=sigma,
        drift=drift,
        discount=discount,
        source=source,
        control_set=(0.0, 1.0),
        domain=BoxDomain([0.0, 0.0], [2.0, 2.0]),
        # both vanish on the boundary; outside the box only sin sin continues the solution
        dirichlet=(lambda x: np.zeros(np.shape(x)[:-1])) if as_printed else _sinsin,
        exact=_sinsin,
    )


def _isotropic_sigma(sig: float, controlled: bool):
    def sigma(a, x):
        x = np.asarray(x, dtype=float)
        scale = sig * a if controlled else sig
        return np.broadcast_to(scale * np.eye(2), x.shape[:-1] + (2, 2))

    return sigma


def _rotating_drift(b: float):
    def drift(a, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(b * np.array([a, np.sqrt(max(0.0, 1.0 - a * a))]), x.shape).copy()

    return drift


def _k_regular(X, Y):
    """Sup over [-1, 1] of ``a sin(pi y) cos(pi x) + sqrt(1 - a^2) sin(pi x) cos(pi y)``."""
    A = np.sin(PI * Y) * np.cos(PI * X)
    B = np.sin(PI * X) * np.cos(PI * Y)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_tilde = A / np.sqrt(B**2 + A**2)
    return _k_max(lambda a: a * A + np.sqrt(1.0 - a * a) * B, a_tilde)


def _case2(as_printed: bool) -> ControlProblem:
    sig, b, C = 1.0, -1.0, 0.6

    def source(a, x):
        X, Y = _xy(x)
        return (C + PI**2 * sig**2) * np.sin(PI * X) * np.sin(PI * Y) - b * PI * _k_regular(X, Y)

    return ControlProblem(
        name="case2",
        dim=2,
        noise_dim=2,
        sigma=_isotropic_sigma(sig, controlled=as_printed),
        drift=_rotating_drift(b),
        discount=lambda a, x: np.full(np.shape(x)[:-1], C),
        source=source,
        control_set=(-1.0, 1.0),
        domain=BoxDomain([0.0, 0.0], [0.5, 0.5]),
        dirichlet=_sinsin,
        exact=_sinsin,
    )


def _case3_v(x):
    X, Y = _xy(x)
    return np.sin(PI * Y) * np.where(X <= 0.0, np.sin(PI * X), np.sin(0.5 * PI * X))


def _case3(as_printed: bool) -> ControlProblem:
    sig, b, C = 1.0, -1.0, 0.6

    def source(a, x):
        X, Y = _xy(x)
        left = (C + PI**2 * sig**2) * np.sin(PI * X) * np.sin(PI * Y) - b * PI * _k_regular(X, Y)
        A = 0.5 * np.sin(PI * Y) * np.cos(0.5 * PI * X)
        B = np.sin(0.5 * PI * X) * np.cos(PI * Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            a_tilde = A / np.sqrt(B**2 + A**2)
        k_hat = _k_max(lambda t: t * A + np.sqrt(1.0 - t * t) * B, a_tilde, extra=(-a_tilde,))
        # printed second branch carries cos(pi x) where v has sin(pi y)
        shape = np.cos(PI * X) if as_printed else np.sin(PI * Y)
        right = (C + PI**2 * sig**2 * 5.0 / 8.0) * np.sin(0.5 * PI * X) * shape - b * PI * k_hat
        return np.where(X <= 0.0, left, right)

    return ControlProblem(
        name="case3",
        dim=2,
        noise_dim=2,
        sigma=_isotropic_sigma(sig, controlled=as_printed),
        drift=_rotating_drift(b),
        discount=lambda a, x: np.full(np.shape(x)[:-1], C),
        source=source,
        control_set=(-1.0, 1.0),
        domain=BoxDomain([-1.0, -1.0], [1.0, 1.0]),
        dirichlet=_case3_v,
        exact=None,
    )


CASE4 = {"sigma": 1.0, "b": 0.5, "C": 0.7}


def _case4_quadratic(x, as_printed: bool):
    """Coefficients ``(q0, q1, q2)`` of the case-4 source as a quadratic in the inner control."""
    sig, b, C = CASE4["sigma"], CASE4["b"], CASE4["C"]
    X, Y = _xy(x)
    u = np.sin(PI * X) * np.sin(PI * Y)
    cc = np.cos(PI * X) * np.cos(PI * Y)
    sc = np.sin(PI * X) * np.cos(PI * Y)
    if as_printed:
        k = sig**2 * PI**2
        lin = sig**2 * PI**2 * (cc + PI * b * sc)
    else:
        # -tr[a D2u] with a = sigma sigma^T / 2 and sigma = (1, a)^T
        k = 0.5 * sig**2 * PI**2
        lin = sig**2 * PI**2 * cc + PI * b * sc
    return (C + k) * u, -lin, k * u


def f_sup_inner(x, as_printed: bool = False):
    """Inner supremum of the case-4 source over the control interval [-1, 1], exactly."""
    q0, q1, q2 = _case4_quadratic(x, as_printed)
    return sup_quadratic(q0, q1, q2, -1.0, 1.0)


def _case4(as_printed: bool) -> ControlProblem:
    sig, b, C = CASE4["sigma"], CASE4["b"], CASE4["C"]

    def sigma(a, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(sig * np.array([[1.0], [a]]), x.shape[:-1] + (2, 1))

    def drift(a, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(b * np.array([1.0, a]), x.shape).copy()

    def source(a, x):
        X, Y = _xy(x)
        return f_sup_inner(x, as_printed) - b * PI * np.cos(PI * X) * np.sin(PI * Y)

    return ControlProblem(
        name="case4",
        dim=2,
        noise_dim=1,
        sigma=sigma,
        drift=drift,
        discount=lambda a, x: np.full(np.shape(x)[:-1], C),
        source=source,
        control_set=(-1.0, 1.0),
        domain=BoxDomain([-1.0, -1.0], [1.0, 1.0]),
        dirichlet=_sinsin,
        exact=_sinsin,
    )


_CASES = {1: _case1, 2: _case2, 3: _case3, 4: _case4}


def test_case(case_id: int, as_printed: bool = False) -> ControlProblem:
    """One of the four benchmark problems.

    ``as_printed=True`` reproduces the published formulas literally. The
    default corrects them so that the stated solutions solve the equation:
    constant diffusion ``sigma I`` in cases 2 and 3, ``sin(pi y)`` in the
    right branch of case 3, and the ``1/2`` and drift factors of case 4.
    In case 1 the printed boundary data is 0; both variants agree on the
    boundary, but by default samples leaving the box read ``sin(pi x) sin(pi y)``
    (the smooth continuation) instead of 0.
    """
    try:
        builder = _CASES[int(case_id)]
    except (KeyError, TypeError, ValueError):
        raise ProblemError(f"unknown test case {case_id!r}; expected 1, 2, 3 or 4") from None
    return builder(as_printed)


test_case.__test__ = False  # not a pytest test


# -- user-defined problems ---------------------------------------------------

_INDEXED = re.compile(r"^(sigma|b)\[(\d+)(?:,\s*(\d+))?\]$")
_RESERVED = {"name", "dim", "noise", "lower", "upper", "controls", "c", "f", "dirichlet", "exact"}


def _numbers(text: str, consts: dict) -> list:
    return [float(compile_expression(t.strip(), constants=consts)()) for t in text.split(",")]


def load_problem(path) -> ControlProblem:
    """Read a problem from a ``key = expression`` text file.

    Keys: ``name``, ``dim``, ``noise`` (columns of sigma), ``lower``/``upper``
    (comma-separated box corners), ``controls`` (``lo, hi``), ``sigma[i,j]``,
    ``b[i]`` (1-based, missing entries are 0), ``c``, ``f``, ``dirichlet``,
    optional ``exact``. Any other key defines a named constant usable in
    later lines. Coefficients may use ``x y z`` (or ``x1 .. xN``) and ``a``;
    ``dirichlet`` and ``exact`` only the space variables. ``#`` starts a comment.
    """
    path = Path(path)
    entries: dict = {}
    consts: dict = {}
    sig_entries: dict = {}
    drift_entries: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ProblemError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        m = _INDEXED.match(key)
        if m:
            target = sig_entries if m.group(1) == "sigma" else drift_entries
            if m.group(1) == "sigma" and m.group(3) is None:
                raise ProblemError(f"{path}:{lineno}: sigma needs two indices")
            idx = (int(m.group(2)),) if m.group(1) == "b" else (int(m.group(2)), int(m.group(3)))
            target[idx] = (value, lineno)
        elif key in _RESERVED:
            entries[key] = (value, lineno)
        elif re.fullmatch(r"[A-Za-z_]\w*", key):
            try:
                consts[key] = float(compile_expression(value, constants=consts)())
            except ExpressionError as exc:
                raise ProblemError(f"{path}:{lineno}: {exc}") from None
        else:
            raise ProblemError(f"{path}:{lineno}: bad key {key!r}")

    def need(key):
        if key not in entries:
            raise ProblemError(f"{path}: missing required key {key!r}")
        return entries[key][0]

    try:
        dim = int(_numbers(need("dim"), consts)[0])
        noise = int(_numbers(entries.get("noise", (str(dim), 0))[0], consts)[0])
        lower = _numbers(need("lower"), consts)
        upper = _numbers(need("upper"), consts)
        controls = _numbers(need("controls"), consts)
    except ExpressionError as exc:
        raise ProblemError(f"{path}: {exc}") from None
    if len(controls) != 2 or len(lower) != dim or len(upper) != dim:
        raise ProblemError(f"{path}: controls need 'lo, hi' and corners need {dim} entries")

    names = ("x", "y", "z")[:dim] if dim <= 3 else ()
    space_vars = tuple(names) + tuple(f"x{k + 1}" for k in range(dim))

    def compile_field(text, with_control=True):
        vars_ = space_vars + (("a",) if with_control else ())
        try:
            return compile_expression(text, vars_, consts)
        except ExpressionError as exc:
            raise ProblemError(f"{path}: {exc}") from None

    def env(x, a=None):
        x = np.asarray(x, dtype=float)
        out = {f"x{k + 1}": x[..., k] for k in range(dim)}
        out.update({n: x[..., k] for k, n in enumerate(names)})
        if a is not None:
            out["a"] = a
        return out

    def scalar_field(text, with_control=True):
        fn = compile_field(text, with_control)
        if with_control:
            return lambda a, x: np.broadcast_to(fn(**env(x, a)), np.shape(x)[:-1]).astype(float)
        return lambda x: np.broadcast_to(fn(**env(x)), np.shape(x)[:-1]).astype(float)

    for (i, j), (_, lineno) in sig_entries.items():
        if not (1 <= i <= dim and 1 <= j <= noise):
            raise ProblemError(f"{path}:{lineno}: sigma index out of range")
    for (i,), (_, lineno) in drift_entries.items():
        if not 1 <= i <= dim:
            raise ProblemError(f"{path}:{lineno}: b index out of range")
    sig_fns = {k: compile_field(v[0]) for k, v in sig_entries.items()}
    drift_fns = {k: compile_field(v[0]) for k, v in drift_entries.items()}

    def sigma(a, x):
        shape = np.shape(x)[:-1]
        out = np.zeros(shape + (dim, noise))
        for (i, j), fn in sig_fns.items():
            out[..., i - 1, j - 1] = fn(**env(x, a))
        return out

    def drift(a, x):
        shape = np.shape(x)[:-1]
        out = np.zeros(shape + (dim,))
        for (i,), fn in drift_fns.items():
            out[..., i - 1] = fn(**env(x, a))
        return out

    return ControlProblem(
        name=entries.get("name", (path.stem, 0))[0],
        dim=dim,
        noise_dim=noise,
        sigma=sigma,
        drift=drift,
        discount=scalar_field(need("c")),
        source=scalar_field(need("f")),
        control_set=tuple(controls),
        domain=BoxDomain(lower, upper),
        dirichlet=scalar_field(need("dirichlet"), with_control=False),
        exact=scalar_field(entries["exact"][0], with_control=False) if "exact" in entries else None,
    )
