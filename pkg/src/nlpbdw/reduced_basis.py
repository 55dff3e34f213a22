"""Affine reduced spaces built greedily from snapshots, and PBDW estimation."""
from dataclasses import dataclass, replace

import numpy as np

from . import fem
from .errors import (DimensionMismatch, EmptyTrainingSet, LevelMismatch,
                     UnstableEstimate)
from .measurement import SINGULAR_TOL, cross_gramian, inf_sup, measure

DROP_TOL = 1e-10


@dataclass(frozen=True)
class AffineReducedSpace:
    offset: np.ndarray  # (N,)
    basis: np.ndarray  # (N, n), H1_0-orthonormal columns
    picked: tuple = ()
    eps_history: tuple = ()  # eps_est for dim 0, 1, ..., n
    mu: float = np.nan

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def eps_est(self):
        return self.eps_history[-1] if self.eps_history else np.nan

    @property
    def sigma_est(self):
        return self.mu * self.eps_est

    @property
    def gram(self):
        return fem.assemble_h1_gram(fem.build_mesh(fem.level_of(self.offset)))


def _as_columns(snapshots):
    arr = np.asarray(snapshots, dtype=float)
    if isinstance(snapshots, (list, tuple)):
        arr = arr.T
    return arr


def _col_norms(vecs, gvecs):
    return np.sqrt(np.maximum(np.einsum("ij,ij->j", vecs, gvecs), 0.0))


def greedy_build(snapshots, offset=None, max_dim=1, target_eps=0.0, ms=None):
    """Greedy selection of the worst-approximated snapshot, one per step.

    ``snapshots`` is either a list of vectors or an (N, n_snapshots) array.
    ``offset`` defaults to the snapshot mean.  When a measurement space is
    given the inf-sup constant is cached on the result.
    """
    if ms is not None and max_dim >= ms.m:
        raise ValueError(f"max_dim={max_dim} must stay below m={ms.m}")
    snaps = _as_columns(snapshots)
    if snaps.ndim != 2 or snaps.shape[1] == 0:
        raise EmptyTrainingSet("no snapshots to build a reduced space from")
    if offset is None:
        offset = snaps.mean(axis=1)
    offset = np.asarray(offset, dtype=float)
    gram = fem.assemble_h1_gram(fem.build_mesh(fem.level_of(offset)))
    if snaps.shape[0] != offset.shape[0]:
        raise LevelMismatch("snapshots and offset differ in size")

    res = snaps - offset[:, None]
    gres = gram @ res
    orig = _col_norms(res, gres)
    dists = orig.copy()
    basis, picked, history = [], [], [float(dists.max())]
    while len(basis) < max_dim and history[-1] > target_eps:
        k = int(np.argmax(dists))
        v = res[:, k].copy()
        # reorthogonalize against the current basis
        for phi in basis:
            v -= (phi @ (gram @ v)) * phi
        nrm = fem.h1_norm(v, gram)
        if nrm < DROP_TOL * orig[k] or nrm == 0.0:
            break
        phi = v / nrm
        gphi = gram @ phi
        coef = gphi @ res
        res -= np.outer(phi, coef)
        gres -= np.outer(gphi, coef)
        dists = _col_norms(res, gres)
        basis.append(phi)
        picked.append(k)
        history.append(float(dists.max()))

    basis = np.column_stack(basis) if basis else np.zeros((offset.shape[0], 0))
    space = AffineReducedSpace(offset, basis, tuple(picked), tuple(history))
    if ms is not None:
        space = with_inf_sup(space, ms)
    return space


def with_inf_sup(space, ms):
    return replace(space, mu=inf_sup(space, ms))


def project(space, u):
    u = np.asarray(u, dtype=float)
    if u.shape[0] != space.offset.shape[0]:
        raise LevelMismatch("state and reduced space live on different levels")
    z = u - space.offset
    coef = space.basis.T @ (space.gram @ z)
    return space.offset + space.basis @ coef


def dist_to(space, u):
    """H1_0 distance from ``u`` to the affine space."""
    u = np.asarray(u, dtype=float)
    return fem.h1_norm(u - project(space, u), space.gram)


def pbdw_estimate(space, ms, w):
    """Element of ``V + W`` closest to ``V`` among states measuring ``w``."""
    w = np.asarray(w, dtype=float)
    if w.shape != (ms.m,):
        raise DimensionMismatch(f"expected {ms.m} measurements, got {w.shape}")
    w_shift = w - measure(ms, space.offset)
    if space.dim == 0:
        return space.offset + ms.basis @ w_shift
    c = cross_gramian(ms, space.basis)
    q, r = np.linalg.qr(c)
    sv = np.linalg.svd(r, compute_uv=False)
    if sv.min() < SINGULAR_TOL:
        raise UnstableEstimate("cross-Gramian is numerically rank deficient")
    a = np.linalg.solve(r, q.T @ w_shift)
    return space.offset + space.basis @ a + ms.basis @ (w_shift - c @ a)
