"""Residual-based surrogate distance to the solution manifold.

For a candidate ``v`` the dual-norm residual ``R_h(v, y) = |e_0 + sum_j y_j e_j|``
is computed from Riesz lifts ``e_j`` of ``A_j v - f_j`` on a (possibly coarser)
nested level, and ``S_h(v) = min_y R_h(v, y)`` over the parameter box.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import fem
from .errors import LevelMismatch


@dataclass(frozen=True)
class SurrogateQuadratic:
    """``R(y)^2 = c + 2 b.y + y.Q.y`` with ``G = [[c, b], [b, Q]]``.

    ``factor`` is an upper-triangular ``F`` with ``F.T @ F == G``; the
    minimizer works on ``|F @ (1, y)|^2`` to avoid cancellation near zero.
    """
    level: int
    gram: np.ndarray
    factor: np.ndarray
    box: np.ndarray

    @classmethod
    def from_coefficients(cls, Q, b, c, box=None, level=None):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        d = b.shape[0]
        gram = np.empty((d + 1, d + 1))
        gram[0, 0] = c
        gram[0, 1:] = gram[1:, 0] = b
        gram[1:, 1:] = Q
        lam, vec = np.linalg.eigh(gram)
        factor = np.sqrt(np.clip(lam, 0.0, None))[:, None] * vec.T
        if box is None:
            box = np.tile([-1.0, 1.0], (d, 1))
        return cls(level, gram, factor, np.asarray(box, dtype=float))

    @property
    def d(self):
        return self.gram.shape[0] - 1

    @property
    def Q(self):
        return self.gram[1:, 1:]

    @property
    def b(self):
        return self.gram[1:, 0]

    @property
    def c(self):
        return self.gram[0, 0]

    def value(self, y):
        y = np.asarray(y, dtype=float)
        r = self.factor[:, 0] + self.factor[:, 1:] @ y
        return float(r @ r)


class BoxMinimum(NamedTuple):
    y: np.ndarray
    value: float
    converged: bool


def residual_duals(problem, v, level):
    """Columns ``A_j v - f_j`` (j = 0..d) as functionals on ``level``."""
    v = np.asarray(v, dtype=float)
    if fem.level_of(v) != problem.level:
        raise LevelMismatch("candidate must live on the problem's fine level")
    if level > problem.level:
        raise LevelMismatch(f"level {level} is finer than the problem level")
    fine = np.column_stack([a @ v - f for a, f in
                            zip(problem.operators, problem.loads)])
    return fem.transfer_dual(fine, level)


def quadratic_from_duals(duals, level, box, tol=fem.DEFAULT_TOL):
    mesh = fem.build_mesh(level)
    lifts = fem.riesz_lift(mesh, duals, tol).reshape(duals.shape)
    gram = lifts.T @ (fem.assemble_h1_gram(mesh) @ lifts)
    gram = 0.5 * (gram + gram.T)
    factor = np.linalg.qr(fem.gradient_operator(level) @ lifts, mode="r")
    return SurrogateQuadratic(level, gram, factor, np.asarray(box, dtype=float))


def build_quadratic(problem, v, level, tol=fem.DEFAULT_TOL):
    return quadratic_from_duals(residual_duals(problem, v, level), level,
                                problem.box, tol)


def _start_points(F0, F1, lo, hi):
    d = lo.shape[0]
    mid = 0.5 * (lo + hi)
    alt = np.where(np.arange(d) % 2 == 0, hi, lo)
    alt2 = np.where(np.arange(d) % 2 == 0, lo, hi)
    grad0 = F1.T @ (F0 + F1 @ mid)
    downhill = np.where(grad0 > 0, lo, hi)
    free = np.linalg.lstsq(F1, -F0, rcond=None)[0]
    rng = np.random.Generator(np.random.PCG64(0))
    rand = rng.uniform(lo, hi)
    return np.array([mid, hi, lo, alt, alt2, downhill,
                     np.clip(free, lo, hi), rand])


def _polish(F0, F1, y, lo, hi):
    """Solve the least-squares problem exactly on the free coordinates."""
    grad = F1.T @ (F0 + F1 @ y)
    active = ((y <= lo) & (grad > 0)) | ((y >= hi) & (grad < 0))
    if active.all():
        return y
    free = ~active
    rhs = -(F0 + F1[:, active] @ y[active])
    sol = np.linalg.lstsq(F1[:, free], rhs, rcond=None)[0]
    if np.any(sol < lo[free]) or np.any(sol > hi[free]):
        return y
    out = y.copy()
    out[free] = sol
    return out


def minimize_box(q, max_iter=100_000, rtol=1e-9):
    """Minimize ``R(y)^2`` over the box by accelerated projected gradient.

    Eight starting points are iterated together; each result is refined by
    an exact solve on its free coordinates and the best value is returned.
    """
    F0, F1 = q.factor[:, 0], q.factor[:, 1:]
    lo, hi = q.box[:, 0], q.box[:, 1]
    starts = _start_points(F0, F1, lo, hi)
    lip = 2.0 * np.linalg.norm(F1, 2) ** 2
    tol = rtol * max(1.0, float(np.linalg.norm(q.b)))

    def objective(Y):
        R = F0[None, :] + Y @ F1.T
        return np.einsum("ij,ij->i", R, R)

    def gradient(Y):
        return 2.0 * (F0[None, :] + Y @ F1.T) @ F1

    converged = np.zeros(len(starts), dtype=bool)
    Y = starts.copy()
    if lip > 0:
        Z, t = Y.copy(), np.ones(len(starts))
        fY = objective(Y)
        for _ in range(max_iter):
            Ynew = np.clip(Z - gradient(Z) / lip, lo, hi)
            fnew = objective(Ynew)
            # restart momentum where the objective went up
            up = fnew > fY
            tnew = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t ** 2))
            beta = np.where(up, 0.0, (t - 1.0) / tnew)[:, None]
            Z = Ynew + beta * (Ynew - Y)
            t = np.where(up, 1.0, tnew)
            Y, fY = Ynew, fnew
            pg = lip * np.linalg.norm(Y - np.clip(Y - gradient(Y) / lip, lo, hi),
                                      axis=1)
            converged = pg <= tol
            if converged.all():
                break
    else:
        converged[:] = True

    best_y, best_val = None, np.inf
    for y in Y:
        for cand in (y, _polish(F0, F1, y, lo, hi)):
            val = q.value(cand)
            if val < best_val:
                best_y, best_val = cand, val
    return BoxMinimum(best_y, max(best_val, 0.0), bool(converged.any()))


def surrogate(problem, v, level, tol=fem.DEFAULT_TOL):
    """``S_h(v)`` with the Riesz lifts computed on ``level``."""
    return float(np.sqrt(minimize_box(build_quadratic(problem, v, level, tol)).value))
