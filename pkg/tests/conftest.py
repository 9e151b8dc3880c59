import numpy as np
import pytest

# criterion number -> PASS/FAIL line, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

from hjbgll.grid import BoxDomain
from hjbgll.problems import ControlProblem


def make_problem(dim=2, noise=2, sigma=0.0, drift=0.0, c=0.5, f=0.0, controls=(0.0, 1.0),
                 lower=0.0, upper=1.0, dirichlet=0.0, exact=None, name="toy"):
    """Problem with constant coefficients (numbers or callables of the control)."""

    def val(v, a):
        return v(a) if callable(v) else v

    def sig(a, x):
        x = np.asarray(x, dtype=float)
        m = np.zeros((dim, noise))
        k = min(dim, noise)
        m[np.arange(k), np.arange(k)] = val(sigma, a)
        return np.broadcast_to(m, x.shape[:-1] + (dim, noise))

    def b(a, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.full(dim, 1.0) * val(drift, a), x.shape)

    def const(v):
        return lambda a, x: np.full(np.shape(x)[:-1], float(val(v, a)))

    bc = dirichlet if callable(dirichlet) else (lambda x: np.full(np.shape(x)[:-1], float(dirichlet)))
    return ControlProblem(
        name=name, dim=dim, noise_dim=noise, sigma=sig, drift=b, discount=const(c), source=const(f),
        control_set=controls, domain=BoxDomain([lower] * dim, [upper] * dim), dirichlet=bc, exact=exact,
    )


@pytest.fixture
def toy():
    return make_problem
