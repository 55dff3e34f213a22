import json
import time

import numpy as np
import pytest

from nlpbdw import fem
from nlpbdw.cli import main
from nlpbdw.config import load_config, read_config_file
from nlpbdw.errors import ConfigError
from nlpbdw.experiments import load_context, run_exp2
from nlpbdw.measurement import measure
from nlpbdw.store import ArtifactStore

SMALL = ["--fine_level", "4", "--coarse_levels", "[2, 3]", "--n_train", "10",
         "--n_test", "4", "--n_splits", "1", "--m", "4", "--meas_width", "0.0625"]


def test_config_defaults():
    cfg = load_config()
    assert (cfg.fine_level, cfg.coarse_levels, cfg.m, cfg.rb_max_dim) == (7, [2, 3, 4, 5, 6], 8, 7)
    assert (cfg.n_train, cfg.n_test, cfg.n_splits, cfg.meas_width) == (1000, 100, 7, 2.0 ** -6)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# desk run\nfine_level = 5\ncoarse_levels = [2, 3]\n"
                    "output_dir = \"out\"\nc_rule = 0.99\n")
    assert read_config_file(path)["coarse_levels"] == [2, 3]
    cfg = load_config(path, {"m": "6"})
    assert (cfg.fine_level, cfg.c_rule, cfg.m, cfg.rb_max_dim, cfg.output_dir) == (5, 0.99, 6, 5, "out")


@pytest.mark.parametrize("text", ["bogus = 1", "fine_level = [1]", "c_rule = 0.5",
                                  "coarse_levels = [7]", "fine_level 5"])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text + "\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_cli_config_error_exit_code(tmp_path):
    assert main(["offline", "--c_rule", "0.5", "--output_dir", str(tmp_path)]) == 2
    bad = tmp_path / "x.cfg"
    bad.write_text("nonsense = 3\n")
    assert main(["offline", "--config", str(bad)]) == 2
    assert main(["exp1", "--output_dir", str(tmp_path / "missing")]) == 2


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    t0 = time.perf_counter()
    assert main(["offline", "--output_dir", str(out)] + SMALL) == 0
    elapsed = time.perf_counter() - t0
    assert main(["exp1", "--output_dir", str(out), "--plots"]) == 0
    assert main(["exp2", "--output_dir", str(out), "--plots"]) == 0
    return out, elapsed


def test_offline_smoke(small_run):
    out, elapsed = small_run
    assert elapsed < 60
    manifest = json.loads((out / "store" / "manifest.json").read_text())
    assert manifest["family"]["K"] == 2
    assert "PCG64" in manifest["rng"]["algorithm"]
    for meta in manifest["arrays"].values():
        size = (out / "store" / meta["file"]).stat().st_size
        assert size == 8 * int(np.prod(meta["shape"]))


def test_offline_rerun_identical_manifest(tmp_path, monkeypatch):
    runs = []
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        monkeypatch.chdir(tmp_path / name)
        assert main(["offline", "--output_dir", "run"] + SMALL) == 0
        runs.append(tmp_path / name / "run" / "store")
    assert (runs[0] / "manifest.json").read_bytes() == (runs[1] / "manifest.json").read_bytes()
    for f in runs[0].glob("*.f64"):
        assert (runs[1] / f.name).read_bytes() == f.read_bytes()


def test_store_roundtrip(small_run):
    out, _ = small_run
    ctx = load_context(out / "store")
    store = ArtifactStore.open(out / "store")
    assert ctx.family.K == store.manifest["family"]["K"]
    assert ctx.space.dim == store.manifest["global_space"]["dim"]
    gram = ctx.ms.gram
    np.testing.assert_allclose(ctx.ms.basis.T @ gram @ ctx.ms.basis, np.eye(4), atol=1e-10)


def test_reports_written(small_run):
    out, _ = small_run
    for name in ("exp1_surrogate.csv", "exp1_summary.csv", "exp1_fit.csv", "exp1_timing.csv",
                 "exp1_surrogate_error.svg", "exp1_wall_time.svg", "exp2_agreement.csv",
                 "exp2_selection.csv", "exp2_surrogates.csv", "exp2_selection_histogram.svg"):
        assert (out / name).exists(), name
    rows = [l.split(",") for l in (out / "exp1_surrogate.csv").read_text().splitlines()[1:]]
    assert all(float(r[4]) == 0.0 for r in rows if r[1] == "4")
    agree = [l.split(",") for l in (out / "exp2_agreement.csv").read_text().splitlines()[1:]]
    fine = [r for r in agree if r[1] == "4"][0]
    assert int(fine[3]) == 4 and int(fine[5]) == 4


def test_estimate_matches_exp2(small_run, tmp_path):
    out, _ = small_run
    ctx = load_context(out / "store")
    res = run_exp2(ctx, tmp_path / "exp2")
    for i in range(2):
        w = measure(ctx.ms, ctx.test_u[i])
        wf = tmp_path / f"w{i}.txt"
        wf.write_text(" ".join(repr(float(x)) for x in w))
        dest = tmp_path / f"est{i}"
        assert main(["estimate", "--output_dir", str(out), "--w-file", str(wf),
                     "--out", str(dest)]) == 0
        meta = json.loads((dest / "estimate.json").read_text())
        assert meta["k_star"] == res["k_star"][i, -1] + 1
        u = np.fromfile(dest / "u_star.f64", dtype="<f8")
        np.testing.assert_allclose(measure(ctx.ms, u), w, atol=1e-8)


def test_estimate_raw_values(small_run, tmp_path):
    out, _ = small_run
    ctx = load_context(out / "store")
    u = ctx.test_u[0]
    wf = tmp_path / "raw.txt"
    wf.write_text(",".join(repr(float(x)) for x in ctx.ms.duals.T @ u))
    assert main(["estimate", "--output_dir", str(out), "--w-file", str(wf), "--raw",
                 "--out", str(tmp_path / "e")]) == 0
    est = np.fromfile(tmp_path / "e" / "u_star.f64", dtype="<f8")
    np.testing.assert_allclose(measure(ctx.ms, est), measure(ctx.ms, u), atol=1e-8)


def test_estimate_malformed(small_run, tmp_path):
    out, _ = small_run
    wf = tmp_path / "short.txt"
    wf.write_text("0.1 0.2 0.3")
    assert main(["estimate", "--output_dir", str(out), "--w-file", str(wf)]) == 2


def test_estimate_degenerate_space(tmp_path):
    args = ["--output_dir", str(tmp_path), "--rb_max_dim", "0", "--n_splits", "0"]
    assert main(["offline"] + args + SMALL[:-6] + ["--m", "4", "--meas_width", "0.0625"]) == 0
    ctx = load_context(tmp_path / "store")
    space = ctx.family.cells[0].space
    assert ctx.family.K == 1 and space.dim == 0
    w = measure(ctx.ms, space.offset)
    wf = tmp_path / "w.txt"
    wf.write_text("\n".join(repr(float(x)) for x in w))
    assert main(["estimate", "--output_dir", str(tmp_path), "--w-file", str(wf),
                 "--out", str(tmp_path / "e")]) == 0
    est = np.fromfile(tmp_path / "e" / "u_star.f64", dtype="<f8")
    np.testing.assert_allclose(est, space.offset, atol=1e-12)
    shifted = w + np.array([0.1, 0, 0, 0])
    wf.write_text("\n".join(repr(float(x)) for x in shifted))
    assert main(["estimate", "--output_dir", str(tmp_path), "--w-file", str(wf),
                 "--out", str(tmp_path / "e")]) == 0
    est = np.fromfile(tmp_path / "e" / "u_star.f64", dtype="<f8")
    np.testing.assert_allclose(est, space.offset + 0.1 * ctx.ms.basis[:, 0], atol=1e-12)
