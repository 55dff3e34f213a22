import numpy as np
import pytest

from nlpbdw import fem
from nlpbdw.measurement import make_measurements
from nlpbdw.problem import build_diffusion_problem, sample_parameters, solve_forward


@pytest.fixture(scope="session")
def problem4():
    return build_diffusion_problem(4, 0.9)


@pytest.fixture(scope="session")
def problem5():
    return build_diffusion_problem(5, 0.9)


@pytest.fixture(scope="session")
def ms4(problem4):
    return make_measurements(problem4.mesh, 8, 2.0 ** -4, seed=3)


@pytest.fixture(scope="session")
def training4(problem4):
    params = np.array(sample_parameters(60, 11, problem4.box))
    snaps = np.column_stack([solve_forward(problem4, y) for y in params])
    return params, snaps


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def p1_eval(level, coeffs, x, y):
    """Evaluate a P1 function by point location; independent of the assembly code."""
    n = 2 ** level
    h = 1.0 / n
    full = np.zeros((n + 1, n + 1))
    full[1:n, 1:n] = np.asarray(coeffs).reshape(n - 1, n - 1)  # [j, i]
    i = np.minimum((x / h).astype(int), n - 1)
    j = np.minimum((y / h).astype(int), n - 1)
    fx, fy = x / h - i, y / h - j
    u00, u10 = full[j, i], full[j, i + 1]
    u01, u11 = full[j + 1, i], full[j + 1, i + 1]
    lower = u00 + (u10 - u00) * fx + (u11 - u10) * fy
    upper = u00 + (u11 - u01) * fx + (u01 - u00) * fy
    return np.where(fy <= fx, lower, upper)


@pytest.fixture(scope="session")
def gram5():
    return fem.assemble_h1_gram(fem.build_mesh(5))
