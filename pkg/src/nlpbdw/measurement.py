"""Local-average measurements, their Riesz representers and the space W."""
from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import DependentRepresenters, LevelMismatch

DEFAULT_WIDTH = 2.0 ** -6
PIVOT_TOL = 1e-12
SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class MeasurementSpace:
    level: int
    width: float
    corners: np.ndarray  # (m, 2) lower-left box corners
    duals: np.ndarray  # (N, m) functionals l_i against the hat functions
    representers: np.ndarray  # (N, m) omega_i
    basis: np.ndarray  # (N, m) H1_0-orthonormal q_i
    triangular: np.ndarray  # (m, m) R with representers = basis @ R
    gram_basis: np.ndarray  # (N, m) G @ basis

    @property
    def m(self):
        return self.basis.shape[1]

    @property
    def gram(self):
        return fem.assemble_h1_gram(fem.build_mesh(self.level))


def _clip(poly, axis, bound, keep_below):
    out = []
    k = len(poly)
    for idx in range(k):
        p, q = poly[idx], poly[(idx + 1) % k]
        p_in = p[axis] <= bound if keep_below else p[axis] >= bound
        q_in = q[axis] <= bound if keep_below else q[axis] >= bound
        if p_in:
            out.append(p)
        if p_in != q_in:
            t = (bound - p[axis]) / (q[axis] - p[axis])
            out.append(p + t * (q - p))
    return out


def _polygon_area_centroid(poly):
    pts = np.asarray(poly)
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-300:
        return 0.0, pts.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6 * area)
    cy = ((y + yn) * cross).sum() / (6 * area)
    return abs(area), np.array([cx, cy])


def box_average_weights(mesh, corner, width):
    """Weights over all mesh vertices of ``u -> |B|^-1 int_B u``.

    Each triangle is clipped against the box; a linear function integrates to
    area times its value at the centroid, so the result is exact.
    """
    x0, y0 = corner
    x1, y1 = x0 + width, y0 + width
    h, n = mesh.width, mesh.n
    ilo, ihi = int(np.floor(x0 / h)), min(int(np.ceil(x1 / h)), n)
    jlo, jhi = int(np.floor(y0 / h)), min(int(np.ceil(y1 / h)), n)
    weights = np.zeros(mesh.n_vertices)
    verts, grads = mesh.vertices, mesh.gradients
    for j in range(jlo, jhi):
        for i in range(ilo, ihi):
            for t in (2 * (i + j * n), 2 * (i + j * n) + 1):
                tri = mesh.triangles[t]
                poly = list(verts[tri])
                for axis, bound, below in ((0, x0, False), (0, x1, True),
                                           (1, y0, False), (1, y1, True)):
                    poly = _clip(poly, axis, bound, below)
                    if len(poly) < 3:
                        break
                if len(poly) < 3:
                    continue
                area, cen = _polygon_area_centroid(poly)
                lam12 = grads[t, 1:] @ (cen - verts[tri[0]])
                lam = np.array([1.0 - lam12.sum(), *lam12])
                weights[tri] += area * lam
    return weights / width ** 2


def make_measurements(mesh, m, width=DEFAULT_WIDTH, seed=0, corners=None):
    """Random boxes of the given width, representers and an orthonormal basis.

    ``corners`` overrides the random placement.
    """
    if not 0.0 < width < 1.0:
        raise ValueError("box width must lie in (0, 1)")
    if corners is None:
        rng = np.random.Generator(np.random.PCG64(seed))
        corners = rng.uniform(0.0, 1.0 - width, size=(m, 2))
    corners = np.asarray(corners, dtype=float).reshape(-1, 2)
    if np.any(corners < 0) or np.any(corners + width > 1):
        raise ValueError("measurement boxes must lie inside the unit square")
    interior = mesh.dof >= 0
    duals = np.column_stack([
        box_average_weights(mesh, c, width)[interior] for c in corners])
    reps = fem.riesz_lift(mesh, duals)
    reps = reps.reshape(duals.shape)
    gram = fem.assemble_h1_gram(mesh)
    basis, tri = orthonormalize(reps, gram)
    return MeasurementSpace(mesh.level, float(width), corners, duals, reps,
                            basis, tri, gram @ basis)


def orthonormalize(vectors, gram, passes=2):
    """Modified Gram-Schmidt in the H1_0 inner product, ``vectors = Q @ R``."""
    n, k = vectors.shape
    q = np.zeros((n, k))
    r = np.zeros((k, k))
    for col in range(k):
        v = vectors[:, col].copy()
        orig = fem.h1_norm(v, gram)
        for _ in range(passes):
            for i in range(col):
                c = q[:, i] @ (gram @ v)
                v -= c * q[:, i]
                r[i, col] += c
        nrm = fem.h1_norm(v, gram)
        if nrm < PIVOT_TOL * orig or nrm == 0.0:
            raise DependentRepresenters(
                f"vector {col} is numerically dependent on its predecessors")
        q[:, col] = v / nrm
        r[col, col] = nrm
    return q, r


def measure(ms, u):
    """Coordinates ``w_i = <q_i, u>`` of ``P_W u`` in the orthonormal basis."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != ms.basis.shape[0]:
        raise LevelMismatch("state does not live on the measurement level")
    return ms.gram_basis.T @ u


def reconstruct(ms, w):
    return ms.basis @ np.asarray(w, dtype=float)


def raw_values(ms, u):
    """Measured averages ``l_i(u)``."""
    return ms.duals.T @ np.asarray(u, dtype=float)


def coords_from_raw(ms, values):
    """Convert averages ``l_i(u)`` to orthonormal-basis coordinates."""
    return np.linalg.solve(ms.triangular.T, np.asarray(values, dtype=float))


def cross_gramian(ms, basis):
    basis = np.asarray(basis, dtype=float).reshape(ms.basis.shape[0], -1)
    return ms.gram_basis.T @ basis


def inf_sup(space, ms):
    """Stability constant ``1 / s_min`` of the V-W cross-Gramian.

    Returns 1 for an empty basis and ``inf`` when ``s_min < 1e-12``.
    """
    basis = space.basis if hasattr(space, "basis") else space
    if basis.shape[1] == 0:
        return 1.0
    if basis.shape[1] > ms.m:
        return np.inf
    smin = np.linalg.svd(cross_gramian(ms, basis), compute_uv=False).min()
    if smin < SINGULAR_TOL:
        return np.inf
    # roundoff can push s_min a hair above 1
    return max(1.0, 1.0 / smin)
