"""Offline construction and the two numerical studies, writing CSV reports.

Per-test-point work runs on a thread pool; results are always gathered and
written in test-index order, so the numeric CSV content does not depend on
the number of workers.  Wall-clock timings go to separate files.
"""
import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem, plotting
from .errors import DimensionMismatch, EstimationError, NumericalError
from .measurement import coords_from_raw, make_measurements, measure
from .partition import RBConfig, build_family
from .pipeline import candidates, select_from_values, surrogate_values
from .problem import build_diffusion_problem, sample_parameters, solve_forward
from .reduced_basis import dist_to, greedy_build, pbdw_estimate
from .store import ArtifactStore, new_store
from .surrogate import surrogate

log = logging.getLogger(__name__)


def _map(fn, n, threads):
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _solve_all(problem, params, tol, threads):
    def one(i):
        try:
            return solve_forward(problem, params[i], tol)
        except EstimationError as exc:
            raise NumericalError(
                f"forward solve failed at y={params[i].tolist()}: {exc}") from exc
    return np.array(_map(one, len(params), threads))


def run_offline(cfg, store_dir, threads=1):
    cfg.validate()
    t0 = time.perf_counter()
    problem = build_diffusion_problem(cfg.fine_level, cfg.c_rule)
    train = np.array(sample_parameters(cfg.n_train, cfg.seed, problem.box))
    test = np.array(sample_parameters(cfg.n_test, cfg.seed + 1, problem.box))
    train_u = _solve_all(problem, train, cfg.solver_tol, threads)
    test_u = _solve_all(problem, test, cfg.solver_tol, threads)
    log.info("solved %d snapshots in %.1fs", len(train) + len(test),
             time.perf_counter() - t0)

    ms = make_measurements(problem.mesh, cfg.m, cfg.meas_width, cfg.seed + 2)
    rb = RBConfig(cfg.rb_max_dim, cfg.rb_target_eps)
    space = greedy_build(train_u.T, max_dim=rb.max_dim,
                         target_eps=rb.target_eps, ms=ms)
    family = build_family(train, train_u.T, ms, rb, n_splits=cfg.n_splits,
                          box=problem.box)
    log.info("family with K=%d cells, max sigma_est %.3g", family.K,
             family.sigmas.max())

    store = new_store(store_dir, cfg)
    store.manifest["problem"] = {
        "d": problem.d, "c_rule": cfg.c_rule, "level": problem.level,
        "coeffs": problem.coeffs.tolist(),
        "ellipticity": list(problem.ellipticity)}
    store.put("train_params", train)
    store.put("train_snapshots", train_u)
    store.put("test_params", test)
    store.put("test_snapshots", test_u)
    store.put_measurements(ms)
    store.manifest["global_space"] = store.put_space("global", space)
    store.manifest["global_space"]["eps_history"] = list(space.eps_history)
    store.put_family(family)
    store.write_manifest()
    return store


@dataclass
class Context:
    cfg: object
    problem: object
    ms: object
    space: object
    family: object
    test_params: np.ndarray
    test_u: np.ndarray


def load_context(store_dir):
    store = ArtifactStore.open(store_dir)
    cfg = store.config
    problem = build_diffusion_problem(cfg.fine_level, cfg.c_rule)
    space = store.get_space("global", store.manifest["global_space"]["mu"])
    return Context(cfg, problem, store.get_measurements(), space,
                   store.get_family(), store.get("test_params"),
                   store.get("test_snapshots"))


def fit_slope(levels, mean_err):
    """Least-squares slope of log2(error) against log2(h) = -s."""
    levels = np.asarray(levels, dtype=float)
    err = np.asarray(mean_err, dtype=float)
    keep = err > 0
    if keep.sum() < 2:
        return np.nan
    return float(np.polyfit(-levels[keep], np.log2(err[keep]), 1)[0])


def run_exp1(ctx, out_dir, threads=1, plots=False):
    """Coarse-surrogate accuracy and cost for the single global space."""
    cfg, out = ctx.cfg, Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = cfg.levels
    gram = ctx.problem.gram

    def one(i):
        u = ctx.test_u[i]
        u_star = pbdw_estimate(ctx.space, ctx.ms, measure(ctx.ms, u))
        values, times = [], []
        for s in levels:
            t0 = time.perf_counter()
            values.append(surrogate(ctx.problem, u_star, s, cfg.solver_tol))
            times.append(time.perf_counter() - t0)
        return (values, times, fem.h1_norm(u - u_star, gram),
                dist_to(ctx.space, u))

    results = _map(one, cfg.n_test, threads)
    fine_idx = levels.index(cfg.fine_level)
    S = np.array([r[0] for r in results])
    T = np.array([r[1] for r in results])
    abs_err = np.abs(S - S[:, [fine_idx]])

    write_csv(out / "exp1_surrogate.csv",
              ["test_idx", "s", "S_s", "S_fine", "abs_err"],
              [(i, s, S[i, j], S[i, fine_idx], abs_err[i, j])
               for i in range(cfg.n_test) for j, s in enumerate(levels)])
    write_csv(out / "exp1_timing.csv", ["test_idx", "s", "wall_seconds"],
              [(i, s, T[i, j]) for i in range(cfg.n_test)
               for j, s in enumerate(levels)])

    mean_err = abs_err.mean(axis=0)
    coarse = [j for j, s in enumerate(levels) if s != cfg.fine_level]
    slope = fit_slope([levels[j] for j in coarse], mean_err[coarse])
    write_csv(out / "exp1_summary.csv", ["s", "h", "mean_abs_err"],
              [(s, 2.0 ** -s, mean_err[j]) for j, s in enumerate(levels)])
    write_csv(out / "exp1_timing_summary.csv", ["s", "h", "total_wall_seconds"],
              [(s, 2.0 ** -s, T[:, j].sum()) for j, s in enumerate(levels)])
    errors = np.array([r[2] for r in results])
    dists = np.array([r[3] for r in results])
    fit = {
        "slope": slope,
        "mu": ctx.space.mu,
        "eps_est": ctx.space.eps_est,
        "sigma_est": ctx.space.sigma_est,
        "dim": ctx.space.dim,
        "max_test_error": errors.max(),
        "max_test_dist": dists.max(),
        "linear_bound": ctx.space.mu * dists.max(),
    }
    write_csv(out / "exp1_fit.csv", ["key", "value"], fit.items())
    if plots:
        plotting.plot_surrogate_error([levels[j] for j in coarse],
                                      mean_err[coarse], slope,
                                      out / "exp1_surrogate_error.svg")
        plotting.plot_wall_time(levels, T.sum(axis=0), out / "exp1_wall_time.svg")
    log.info("exp1: slope %.3f, sigma_est %.3g", slope, ctx.space.sigma_est)
    return {"levels": levels, "mean_abs_err": mean_err, "slope": slope,
            "wall": T.sum(axis=0), "fit": fit}


def run_exp2(ctx, out_dir, threads=1, plots=False):
    """Agreement of coarse and fine surrogate model selection."""
    cfg, out = ctx.cfg, Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = cfg.levels
    family, gram = ctx.family, ctx.problem.gram

    def one(i):
        u = ctx.test_u[i]
        w = measure(ctx.ms, u)
        cands = candidates(family, ctx.ms, w)
        errs = np.array([np.nan if c is None else fem.h1_norm(u - c, gram)
                         for c in cands])
        vals = [surrogate_values(ctx.problem, cands, s, cfg.solver_tol)
                for s in levels]
        glob = fem.h1_norm(u - pbdw_estimate(ctx.space, ctx.ms, w), gram)
        return np.array(vals), errs, family.locate(ctx.test_params[i]), glob

    results = _map(one, cfg.n_test, threads)
    fine_idx = levels.index(cfg.fine_level)
    k_star = np.array([[select_from_values(v)[0] for v in r[0]]
                       for r in results])
    k_true = np.array([r[2] for r in results])
    k_fine = k_star[:, fine_idx]

    write_csv(out / "exp2_surrogates.csv", ["test_idx", "s", "k", "S"],
              [(i, s, k + 1, r[0][j, k]) for i, r in enumerate(results)
               for j, s in enumerate(levels) for k in range(family.K)])
    write_csv(out / "exp2_selection.csv",
              ["test_idx", "s", "k_star", "k_fine", "k_true", "S_selected",
               "error_selected"],
              [(i, s, k_star[i, j] + 1, k_fine[i] + 1, k_true[i] + 1,
                r[0][j, k_star[i, j]], r[1][k_star[i, j]])
               for i, r in enumerate(results) for j, s in enumerate(levels)])
    agree_fine = (k_star == k_fine[:, None]).sum(axis=0)
    agree_true = (k_star == k_true[:, None]).sum(axis=0)
    write_csv(out / "exp2_agreement.csv",
              ["c_rule", "s", "h", "agree_fine", "agree_true", "n_test"],
              [(repr(cfg.c_rule), s, 2.0 ** -s, agree_fine[j], agree_true[j],
                cfg.n_test) for j, s in enumerate(levels)])
    err_fine = np.array([r[1][k] for r, k in zip(results, k_fine)])
    err_global = np.array([r[3] for r in results])
    summary = {
        "K": family.K,
        "max_sigma_est": float(np.nanmax(family.sigmas)),
        "max_error_family": err_fine.max(),
        "max_error_global": err_global.max(),
        "mean_error_family": err_fine.mean(),
        "mean_error_global": err_global.mean(),
    }
    write_csv(out / "exp2_summary.csv", ["key", "value"], summary.items())
    if plots:
        plotting.plot_selection_histogram(k_fine + 1, k_true + 1, family.K,
                                          out / "exp2_selection_histogram.svg")
    return {"levels": levels, "agree_fine": agree_fine,
            "agree_true": agree_true, "k_star": k_star, "k_true": k_true,
            "summary": summary}


def read_measurements(path, m):
    text = Path(path).read_text().replace(",", " ").split()
    try:
        values = np.array([float(t) for t in text])
    except ValueError as exc:
        raise DimensionMismatch(f"cannot parse measurement file: {exc}") from exc
    if values.shape != (m,):
        raise DimensionMismatch(f"expected {m} measurements, found {values.size}")
    return values


def run_estimate(ctx, w_file, out_dir, level=None, raw=False):
    """Reconstruct one state from a file of ``m`` measurement values."""
    level = ctx.cfg.fine_level if level is None else level
    w = read_measurements(w_file, ctx.ms.m)
    if raw:
        w = coords_from_raw(ctx.ms, w)
    cands = candidates(ctx.family, ctx.ms, w)
    values = surrogate_values(ctx.problem, cands, level, ctx.cfg.solver_tol)
    k, ties = select_from_values(values)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    u_star = np.ascontiguousarray(cands[k], dtype="<f8")
    (out / "u_star.f64").write_bytes(u_star.tobytes())
    meta = {"k_star": k + 1, "level": level, "fine_level": ctx.cfg.fine_level,
            "n_nodes": int(u_star.size),
            "surrogates": [None if np.isnan(v) else float(v) for v in values],
            "ties": [t + 1 for t in ties], "w": w.tolist()}
    (out / "estimate.json").write_text(json.dumps(meta, indent=2) + "\n")
    return k, u_star, values
