"""Nested P1 finite elements on the unit square.

Level ``s`` is the uniform grid of width ``h = 2**-s``.  Every grid square is
split along its lower-left to upper-right diagonal, unknowns are the interior
vertices in lexicographic order (x fastest).  Boundary values are zero.

Coefficient vectors are plain 1-d numpy arrays (or 2-d with one column per
vector).  Whether an array holds nodal values or a functional tested against
the hat functions is a matter of convention; the level is recovered from the
array length.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (DegenerateMesh, LevelMismatch, NonConvergence,
                     SingularOperator, SubdomainMisaligned)

DEFAULT_TOL = 1e-10
# systems above this size fall back to Jacobi-preconditioned CG
DIRECT_SOLVE_LIMIT = 400_000
N_SUBDOMAINS_1D = 4


@dataclass(frozen=True)
class StructuredMesh:
    level: int

    @property
    def n(self):
        return 2 ** self.level

    @property
    def width(self):
        return 2.0 ** -self.level

    @property
    def n_vertices(self):
        return (self.n + 1) ** 2

    @property
    def n_interior(self):
        return (self.n - 1) ** 2

    @property
    def n_triangles(self):
        return 2 * self.n ** 2

    @cached_property
    def vertices(self):
        t = np.linspace(0.0, 1.0, self.n + 1)
        x, y = np.meshgrid(t, t)
        return np.column_stack([x.ravel(), y.ravel()])

    @cached_property
    def triangles(self):
        n = self.n
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        v00 = (i + j * (n + 1)).ravel()
        v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        tri = np.empty((2 * n * n, 3), dtype=np.int64)
        tri[0::2] = lower
        tri[1::2] = upper
        return tri

    @cached_property
    def dof(self):
        """Interior index of every vertex, -1 on the boundary."""
        n = self.n
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
        inside = (i > 0) & (i < n) & (j > 0) & (j < n)
        out = np.where(inside, (i - 1) + (j - 1) * (n - 1), -1)
        return out.ravel()

    @cached_property
    def areas(self):
        return np.full(self.n_triangles, 0.5 * self.width ** 2)

    @cached_property
    def gradients(self):
        """Gradients of the three barycentric functions per triangle, (T, 3, 2)."""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        jac = np.stack([e1, e2], axis=1)  # rows are edge vectors
        inv = np.linalg.inv(jac)
        # grad(l1), grad(l2) are the columns of inv; grad(l0) = -sum
        g12 = np.transpose(inv, (0, 2, 1))
        g0 = -g12.sum(axis=1, keepdims=True)
        return np.concatenate([g0, g12], axis=1)

    @cached_property
    def subdomain(self):
        """Index of the quarter-width square containing each triangle."""
        if self.level < 2:
            raise SubdomainMisaligned(
                f"level {self.level} < 2: triangles straddle subdomains")
        c = self.vertices[self.triangles].mean(axis=1)
        jx = np.floor(c[:, 0] * N_SUBDOMAINS_1D).astype(np.int64)
        jy = np.floor(c[:, 1] * N_SUBDOMAINS_1D).astype(np.int64)
        return jx + N_SUBDOMAINS_1D * jy


@lru_cache(maxsize=None)
def build_mesh(s):
    if s < 1:
        raise DegenerateMesh(f"level {s} has no interior nodes")
    return StructuredMesh(int(s))


def level_of_size(n):
    """Invert ``n = (2**s - 1)**2``."""
    root = int(round(np.sqrt(n)))
    s = int(round(np.log2(root + 1)))
    if s < 1 or (2 ** s - 1) ** 2 != n:
        raise LevelMismatch(f"{n} is not an interior node count")
    return s


def level_of(v):
    return level_of_size(np.shape(v)[0])


def _check_level(v, level):
    got = level_of(v)
    if got != level:
        raise LevelMismatch(f"vector at level {got}, expected {level}")


def _assemble(mesh, weights):
    grads = mesh.gradients
    local = np.einsum("tak,tbk->tab", grads, grads)
    local *= (mesh.areas * weights)[:, None, None]
    dofs = mesh.dof[mesh.triangles]
    rows = np.repeat(dofs, 3, axis=1).ravel()
    cols = np.tile(dofs, (1, 3)).ravel()
    vals = local.ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.n_interior
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
    mat = mat.tocsr()
    mat.sum_duplicates()
    # exact symmetry regardless of summation order
    return ((mat + mat.T) * 0.5).tocsr()


@lru_cache(maxsize=None)
def _gram_cached(level):
    mat = _assemble(build_mesh(level), np.ones(build_mesh(level).n_triangles))
    mat.data.setflags(write=False)
    return mat


def assemble_h1_gram(mesh):
    """Stiffness matrix of the unit-coefficient Laplacian (H1_0 inner product)."""
    return _gram_cached(mesh.level)


def assemble_diffusion_stiffness(mesh, kappa):
    """Stiffness for a diffusivity constant on each of the 16 quarter squares.

    ``kappa`` has 16 entries ordered lexicographically (x fastest, bottom row
    first).
    """
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (N_SUBDOMAINS_1D ** 2,):
        raise ValueError("kappa needs one value per subdomain")
    return _assemble(mesh, kappa[mesh.subdomain])


def assemble_constant_load(mesh, value):
    vals = np.repeat(mesh.areas / 3.0, 3)
    dofs = mesh.dof[mesh.triangles].ravel()
    keep = dofs >= 0
    out = np.bincount(dofs[keep], weights=vals[keep], minlength=mesh.n_interior)
    return value * out


@lru_cache(maxsize=None)
def gradient_operator(level):
    """Matrix ``D`` with ``D.T @ D == gram`` so that ``|D u|`` is the H1_0 norm.

    Rows hold ``sqrt(area) * grad(u)`` per triangle and component.
    """
    mesh = build_mesh(level)
    t = mesh.n_triangles
    w = np.sqrt(mesh.areas)[:, None, None] * mesh.gradients  # (T, 3, 2)
    dofs = mesh.dof[mesh.triangles]
    rows = (2 * np.arange(t)[:, None, None] + np.arange(2)[None, None, :])
    rows = np.broadcast_to(rows, w.shape)
    cols = np.broadcast_to(dofs[:, :, None], w.shape)
    keep = cols >= 0
    return sp.csr_matrix((w[keep], (rows[keep], cols[keep])),
                         shape=(2 * t, mesh.n_interior))


class _DirectSolver:
    def __init__(self, op):
        try:
            self._lu = spla.splu(sp.csc_matrix(op), permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SingularOperator(str(exc)) from exc

    def __call__(self, rhs):
        return self._lu.solve(np.asarray(rhs, dtype=float))


def _cg(op, rhs, tol, maxiter=None):
    diag = op.diagonal()
    if np.any(diag <= 0):
        raise SingularOperator("non-positive diagonal entry")
    precond = sp.diags(1.0 / diag)
    x, info = spla.cg(op, rhs, rtol=tol, atol=0.0, M=precond, maxiter=maxiter)
    if info > 0:
        raise NonConvergence(f"CG stopped after {info} iterations")
    return x


def solve_spd(op, rhs, tol=DEFAULT_TOL):
    """Solve ``op @ x = rhs`` for an SPD sparse ``op``.

    ``rhs`` may be 2-d with one right-hand side per column.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != op.shape[0]:
        raise LevelMismatch(
            f"rhs length {rhs.shape[0]} does not match operator {op.shape[0]}")
    if not np.any(rhs):
        return np.zeros_like(rhs)
    if op.shape[0] <= DIRECT_SOLVE_LIMIT:
        x = _DirectSolver(op)(rhs)
    elif rhs.ndim == 1:
        x = _cg(op, rhs, tol)
    else:
        x = np.column_stack([_cg(op, r, tol) for r in rhs.T])
    if not np.all(np.isfinite(x)):
        raise SingularOperator("solution is not finite")
    return x


@lru_cache(maxsize=None)
def _gram_solver(level):
    gram = _gram_cached(level)
    if gram.shape[0] <= DIRECT_SOLVE_LIMIT:
        return _DirectSolver(gram)
    return None


def riesz_lift(mesh, dual, tol=DEFAULT_TOL):
    """Representer ``e`` of a functional: ``<e, z>_{H1_0} = dual . z``."""
    dual = np.asarray(dual, dtype=float)
    _check_level(dual, mesh.level)
    if not np.any(dual):
        return np.zeros_like(dual)
    solver = _gram_solver(mesh.level)
    if solver is None:
        return solve_spd(_gram_cached(mesh.level), dual, tol)
    return solver(dual)


def h1_inner(u, v, gram):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[0] != gram.shape[0] or v.shape[0] != gram.shape[0]:
        raise LevelMismatch("vectors and Gram matrix live on different levels")
    return u.T @ (gram @ v)


def h1_norm(u, gram):
    return float(np.sqrt(max(h1_inner(u, u, gram), 0.0)))


@lru_cache(maxsize=None)
def _prolong_one(level):
    """Interpolation from ``level`` to ``level + 1``."""
    coarse = build_mesh(level)
    fine = build_mesh(level + 1)
    nc, nf = coarse.n, fine.n
    fi, fj = np.meshgrid(np.arange(1, nf), np.arange(1, nf))
    fi, fj = fi.ravel(), fj.ravel()
    rows = fine.dof[fi + fj * (nf + 1)]

    def coarse_dof(ci, cj):
        return coarse.dof[ci + cj * (nc + 1)]

    ri, rj, cols, vals = [], [], [], []
    even_i, even_j = fi % 2 == 0, fj % 2 == 0
    # coincident vertices
    m = even_i & even_j
    ri.append(rows[m]); cols.append(coarse_dof(fi[m] // 2, fj[m] // 2))
    vals.append(np.ones(m.sum()))
    # midpoints of horizontal, vertical and diagonal coarse edges
    for mask, (dai, daj), (dbi, dbj) in [
            (~even_i & even_j, (-1, 0), (1, 0)),
            (even_i & ~even_j, (0, -1), (0, 1)),
            (~even_i & ~even_j, (-1, -1), (1, 1))]:
        for di, dj in [(dai, daj), (dbi, dbj)]:
            ri.append(rows[mask])
            cols.append(coarse_dof((fi[mask] + di) // 2, (fj[mask] + dj) // 2))
            vals.append(np.full(mask.sum(), 0.5))
    ri, cols, vals = map(np.concatenate, (ri, cols, vals))
    keep = cols >= 0
    return sp.csr_matrix((vals[keep], (ri[keep], cols[keep])),
                         shape=(fine.n_interior, coarse.n_interior))


@lru_cache(maxsize=None)
def prolongation_matrix(source, target):
    if target <= source:
        raise LevelMismatch(f"cannot prolong from level {source} to {target}")
    mat = _prolong_one(source)
    for s in range(source + 1, target):
        mat = (_prolong_one(s) @ mat).tocsr()
    return mat


def prolong(v, target):
    """Nodal values of the same piecewise-linear function on a finer level."""
    v = np.asarray(v, dtype=float)
    return prolongation_matrix(level_of(v), target) @ v


def restrict_dual(r, target):
    """Restriction of a functional to a coarser level (adjoint of :func:`prolong`)."""
    r = np.asarray(r, dtype=float)
    source = level_of(r)
    if target >= source:
        raise LevelMismatch(f"cannot restrict from level {source} to {target}")
    return prolongation_matrix(target, source).T @ r


def transfer_dual(r, target):
    """Like :func:`restrict_dual` but the identity when levels coincide."""
    if level_of(r) == target:
        return np.asarray(r, dtype=float)
    return restrict_dual(r, target)
