"""Nonlinear estimation: one PBDW candidate per cell, surrogate model selection."""
import logging
from dataclasses import dataclass

import numpy as np

from . import fem
from .errors import AllCellsUnstable, UnstableEstimate
from .reduced_basis import pbdw_estimate
from .surrogate import surrogate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionResult:
    k_star: int  # 0-based cell index
    level: int
    surrogates: np.ndarray  # nan for excluded cells
    candidates: list  # None for excluded cells
    ties: tuple = ()
    unstable: tuple = ()

    @property
    def u_star(self):
        return self.candidates[self.k_star]


def candidates(family, ms, w):
    """PBDW reconstruction per cell; cells with an unstable estimate give None."""
    out = []
    for k, cell in enumerate(family.cells):
        if not np.isfinite(cell.space.mu):
            out.append(None)
            continue
        try:
            out.append(pbdw_estimate(cell.space, ms, w))
        except UnstableEstimate:
            log.warning("cell %d skipped: unstable PBDW estimate", k)
            out.append(None)
    if all(u is None for u in out):
        raise AllCellsUnstable("no cell produced a stable estimate")
    return out


def surrogate_values(problem, cands, level, tol=fem.DEFAULT_TOL):
    return np.array([np.nan if u is None else surrogate(problem, u, level, tol)
                     for u in cands])


def select_from_values(values):
    """``argmin`` over finite entries, lowest index on ties."""
    values = np.asarray(values, dtype=float)
    k = int(np.nanargmin(values))
    ties = tuple(int(i) for i in np.flatnonzero(values == values[k]))
    if len(ties) > 1:
        log.info("surrogate tie between cells %s", ties)
    return k, ties


def select(problem, family, ms, w, level, tol=fem.DEFAULT_TOL, cands=None):
    if cands is None:
        cands = candidates(family, ms, w)
    values = surrogate_values(problem, cands, level, tol)
    k, ties = select_from_values(values)
    unstable = tuple(i for i, u in enumerate(cands) if u is None)
    return SelectionResult(k, level, values, cands, ties, unstable)


def estimate(problem, family, ms, w, level, tol=fem.DEFAULT_TOL):
    return select(problem, family, ms, w, level, tol).u_star
