"""Greedy bisection of the parameter box into cells with local reduced spaces."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyTrainingSet, UnsplittableCell
from .reduced_basis import greedy_build

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RBConfig:
    max_dim: int
    target_eps: float = 0.0


@dataclass
class ParameterCell:
    bounds: np.ndarray  # (d, 2)
    members: np.ndarray  # training indices inside the cell
    space: object
    frozen: bool = False

    @property
    def sigma_est(self):
        return self.space.sigma_est

    @property
    def volume(self):
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))


@dataclass
class AdmissibleFamily:
    box: np.ndarray
    cells: list
    history: list = field(default_factory=list)

    @property
    def K(self):
        return len(self.cells)

    @property
    def sigmas(self):
        return np.array([c.sigma_est for c in self.cells])

    def locate(self, y):
        return locate(self, y)


def _inside(bounds, box, y):
    lo, hi = bounds[:, 0], bounds[:, 1]
    upper_ok = (y < hi) | ((y == hi) & (hi == box[:, 1]))
    return np.all(y >= lo, axis=-1) & np.all(upper_ok, axis=-1)


def members_of(bounds, box, params, candidates=None):
    idx = np.arange(len(params)) if candidates is None else np.asarray(candidates)
    if idx.size == 0:
        return idx
    return idx[_inside(bounds, box, params[idx])]


def locate(family, y):
    """Index of the cell containing ``y`` (left-closed, right-open)."""
    y = np.asarray(y, dtype=float)
    for k, cell in enumerate(family.cells):
        if _inside(cell.bounds, family.box, y):
            return k
    raise ValueError(f"parameter {y} lies outside the family's box")


def _cell(bounds, members, snapshots, ms, cfg):
    space = greedy_build(snapshots[:, members], max_dim=cfg.max_dim,
                         target_eps=cfg.target_eps, ms=ms)
    return ParameterCell(bounds, members, space)


def _halves(cell, i, box, params):
    lo, hi = cell.bounds[i]
    mid = 0.5 * (lo + hi)
    left, right = cell.bounds.copy(), cell.bounds.copy()
    left[i, 1] = mid
    right[i, 0] = mid
    below = params[cell.members, i] < mid
    return (left, cell.members[below]), (right, cell.members[~below])


def _best_split(cell, box, params, snapshots, ms, cfg):
    best = None
    for i in range(params.shape[1]):
        (lb, lm), (rb, rm) = _halves(cell, i, box, params)
        if lm.size == 0 or rm.size == 0:
            continue
        left = _cell(lb, lm, snapshots, ms, cfg)
        right = _cell(rb, rm, snapshots, ms, cfg)
        worst = max(left.sigma_est, right.sigma_est)
        if best is None or worst < best[0]:
            best = (worst, i, left, right)
    return best


def split_step(family, params, snapshots, ms, cfg):
    """Bisect the cell with the largest ``sigma_est`` along its best direction.

    The left child takes the parent's index and the right child is appended.
    """
    sig = np.where([c.frozen for c in family.cells], -np.inf, family.sigmas)
    for k in np.argsort(-sig, kind="stable"):
        cell = family.cells[k]
        if cell.frozen:
            continue
        best = None
        if cell.members.size >= 2:
            best = _best_split(cell, family.box, params, snapshots, ms, cfg)
        if best is None:
            log.info("cell %d cannot be split; freezing it", k)
            cell.frozen = True
            continue
        worst, i, left, right = best
        before = float(family.sigmas.max())
        family.cells[k] = left
        family.cells.append(right)
        family.history.append({
            "cell": int(k), "direction": int(i), "child_sigma": float(worst),
            "max_sigma_before": before,
            "max_sigma_after": float(family.sigmas.max())})
        return family
    raise UnsplittableCell("no cell of the family can be split further")


def build_family(params, snapshots, ms, cfg, n_splits=None, sigma_target=None,
                 box=None):
    """Split until ``n_splits`` bisections are done or ``max sigma <= target``."""
    params = np.asarray(params, dtype=float)
    if params.size == 0:
        raise EmptyTrainingSet("empty training set")
    if n_splits is None and sigma_target is None:
        raise ValueError("give n_splits or sigma_target")
    if box is None:
        box = np.tile([-1.0, 1.0], (params.shape[1], 1))
    box = np.asarray(box, dtype=float)
    root = _cell(box.copy(), members_of(box, box, params), snapshots, ms, cfg)
    family = AdmissibleFamily(box, [root])
    while True:
        if n_splits is not None and len(family.history) >= n_splits:
            break
        if sigma_target is not None and family.sigmas.max() <= sigma_target:
            break
        split_step(family, params, snapshots, ms, cfg)
    return family
