"""Affine-parametric diffusion on the unit square.

    -div(a(x, y) grad u) = 1,   u = 0 on the boundary,
    a(x, y) = 1 + sum_j c_j y_j chi_{D_j}(x),   y in [-1, 1]^16,

with ``c_j = c0 / j`` and ``D_j`` the 4x4 grid of quarter-width squares.
"""
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .errors import LostEllipticity, OutOfBox, SingularOperator

N_PARAMS = 16
C_RULES = (0.9, 0.99)
RNG_ALGORITHM = "numpy.random.Generator(PCG64), uniform(low, high)"


@dataclass(frozen=True)
class AffineParametricProblem:
    level: int
    operators: tuple  # A_0, A_1, ..., A_d
    loads: tuple  # f_0, f_1, ..., f_d
    box: np.ndarray  # (d, 2) lower/upper bounds
    coeffs: np.ndarray  # c_1..c_d
    c_rule: float = field(default=None)

    @property
    def d(self):
        return len(self.operators) - 1

    @property
    def mesh(self):
        return fem.build_mesh(self.level)

    @property
    def gram(self):
        return fem.assemble_h1_gram(self.mesh)

    @property
    def ellipticity(self):
        """Bounds ``(r, R)`` of the diffusivity over the whole box."""
        c1 = float(np.max(np.abs(self.coeffs) * np.abs(self.box).max(axis=1)))
        return 1.0 - c1, 1.0 + c1


def diffusion_coefficients(c_rule, d=N_PARAMS):
    return c_rule / np.arange(1, d + 1)


def build_diffusion_problem(level, c_rule=0.9):
    mesh = fem.build_mesh(level)
    coeffs = diffusion_coefficients(c_rule)
    ops = [fem.assemble_diffusion_stiffness(mesh, np.ones(N_PARAMS))]
    for j in range(N_PARAMS):
        ind = np.zeros(N_PARAMS)
        ind[j] = coeffs[j]
        ops.append(fem.assemble_diffusion_stiffness(mesh, ind))
    zero = np.zeros(mesh.n_interior)
    loads = [fem.assemble_constant_load(mesh, 1.0)] + [zero] * N_PARAMS
    box = np.tile([-1.0, 1.0], (N_PARAMS, 1))
    return AffineParametricProblem(level, tuple(ops), tuple(loads), box,
                                   coeffs, c_rule)


def _check_box(problem, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.d,):
        raise OutOfBox(f"expected {problem.d} parameters, got shape {y.shape}")
    if np.any(y < problem.box[:, 0]) or np.any(y > problem.box[:, 1]):
        raise OutOfBox(f"parameter outside the box: {y}")
    return y


def instantiate(problem, y):
    y = _check_box(problem, y)
    op = problem.operators[0].copy()
    for yj, aj in zip(y, problem.operators[1:]):
        if yj != 0.0:
            op = op + yj * aj
    return op.tocsr()


def rhs(problem, y):
    y = _check_box(problem, y)
    out = problem.loads[0].copy()
    for yj, fj in zip(y, problem.loads[1:]):
        out += yj * fj
    return out


def solve_forward(problem, y, tol=fem.DEFAULT_TOL):
    op = instantiate(problem, y)
    if np.any(op.diagonal() <= 0):
        raise LostEllipticity(f"non-positive diagonal at y={y}")
    try:
        return fem.solve_spd(op, rhs(problem, y), tol)
    except SingularOperator as exc:
        raise LostEllipticity(f"A(y) singular at y={y}") from exc


def sample_parameters(n, seed, box):
    box = np.asarray(box, dtype=float)
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.uniform(box[:, 0], box[:, 1], size=(n, box.shape[0]))
    return list(pts)
