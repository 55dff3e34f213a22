import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlpbdw import fem
from nlpbdw.errors import DependentRepresenters
from nlpbdw.measurement import (box_average_weights, coords_from_raw, inf_sup,
                                make_measurements, measure, orthonormalize,
                                raw_values, reconstruct)

from conftest import p1_eval


def test_average_of_constant_is_one():
    mesh = fem.build_mesh(4)
    for corner in [(0.1, 0.2), (0.0, 0.0), (0.37, 0.81)]:
        w = box_average_weights(mesh, corner, 0.15)
        assert w.sum() == pytest.approx(1.0, rel=1e-13)


def subtriangle_average(level, u, corner, width, refine):
    """Centroid rule on the triangles of a refined grid; exact when the box sits on that grid."""
    n = 2 ** level * refine
    h = 1.0 / n
    i0, j0 = round(corner[0] / h), round(corner[1] / h)
    k = round(width / h)
    i, j = np.meshgrid(np.arange(i0, i0 + k), np.arange(j0, j0 + k))
    x, y = (i.ravel() * h, j.ravel() * h)
    lower = p1_eval(level, u, x + 2 * h / 3, y + h / 3)
    upper = p1_eval(level, u, x + h / 3, y + 2 * h / 3)
    return 0.5 * h * h * (lower + upper).sum() / width ** 2


def test_exact_clipping_against_quadrature(rng):
    level, refine = 3, 64
    mesh = fem.build_mesh(level)
    hsub = 1.0 / (2 ** level * refine)
    for _ in range(5):
        u = rng.standard_normal(mesh.n_interior)
        k = rng.integers(20, 200)
        corner = rng.integers(0, 2 ** level * refine - k, size=2) * hsub
        exact = box_average_weights(mesh, corner, k * hsub)[mesh.dof >= 0] @ u
        oracle = subtriangle_average(level, u, corner, k * hsub, refine)
        assert exact == pytest.approx(oracle, abs=1e-6)


def test_clipping_against_midpoint_rule_unaligned(rng):
    mesh = fem.build_mesh(3)
    u = rng.standard_normal(mesh.n_interior)
    corner, width = np.array([0.2137, 0.5521]), 0.1733
    n = 1500
    t = (np.arange(n) + 0.5) / n * width
    x, y = np.meshgrid(corner[0] + t, corner[1] + t)
    oracle = p1_eval(3, u, x.ravel(), y.ravel()).mean()
    exact = box_average_weights(mesh, corner, width)[mesh.dof >= 0] @ u
    assert exact == pytest.approx(oracle, abs=1e-4)


def test_measurement_space_invariants(ms4, rng):
    gram = ms4.gram
    assert ms4.m == 8
    np.testing.assert_allclose(ms4.basis.T @ gram @ ms4.basis, np.eye(8), atol=1e-10)
    np.testing.assert_allclose(ms4.basis @ ms4.triangular, ms4.representers, atol=1e-12)
    for _ in range(5):
        z = rng.standard_normal(gram.shape[0])
        lhs = ms4.representers.T @ (gram @ z)
        assert np.abs(lhs - ms4.duals.T @ z).max() <= 1e-8 * fem.h1_norm(z, gram)


def test_measure_examples(ms4, rng):
    n = ms4.basis.shape[0]
    assert not np.any(measure(ms4, np.zeros(n)))
    np.testing.assert_allclose(measure(ms4, ms4.basis[:, 0]), np.eye(8)[0], atol=1e-12)
    u = rng.standard_normal(n)
    perp = u - reconstruct(ms4, measure(ms4, u))
    assert np.abs(measure(ms4, perp)).max() <= 1e-10 * np.linalg.norm(u)
    w = measure(ms4, u)
    pw = reconstruct(ms4, w)
    assert fem.h1_norm(pw, ms4.gram) ** 2 == pytest.approx((w ** 2).sum(), rel=1e-10)
    np.testing.assert_allclose(measure(ms4, pw), w, atol=1e-10 * np.abs(w).max())


def test_raw_values_roundtrip(ms4, rng):
    u = rng.standard_normal(ms4.basis.shape[0])
    np.testing.assert_allclose(coords_from_raw(ms4, raw_values(ms4, u)),
                               measure(ms4, u), rtol=1e-8, atol=1e-10)


def test_dependent_representers():
    mesh = fem.build_mesh(3)
    with pytest.raises(DependentRepresenters):
        make_measurements(mesh, 2, 0.1, corners=[[0.3, 0.3], [0.3, 0.3]])
    gram = fem.assemble_h1_gram(mesh)
    v = np.ones((mesh.n_interior, 1))
    with pytest.raises(DependentRepresenters):
        orthonormalize(np.hstack([v, 2 * v]), gram)


def test_boxes_inside_square():
    ms = make_measurements(fem.build_mesh(4), 20, 0.05, seed=9)
    assert np.all(ms.corners >= 0) and np.all(ms.corners + 0.05 <= 1)
    with pytest.raises(ValueError):
        make_measurements(fem.build_mesh(4), 1, 0.1, corners=[[0.95, 0.5]])


def test_inf_sup_examples(ms4, rng):
    n = ms4.basis.shape[0]
    assert inf_sup(ms4.basis[:, :1], ms4) == pytest.approx(1.0)
    assert inf_sup(np.zeros((n, 0)), ms4) == 1.0
    u = rng.standard_normal(n)
    perp = u - reconstruct(ms4, measure(ms4, u))
    perp /= fem.h1_norm(perp, ms4.gram)
    assert inf_sup(perp[:, None], ms4) == np.inf
    phi = rng.standard_normal(n)
    phi /= fem.h1_norm(phi, ms4.gram)
    quotient = 1.0 / np.linalg.norm(measure(ms4, phi))
    assert inf_sup(phi[:, None], ms4) == pytest.approx(quotient, rel=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 7), st.integers(0, 2 ** 32 - 1))
def test_inf_sup_at_least_one(ms4, n, seed):
    r = np.random.default_rng(seed)
    basis, _ = orthonormalize(r.standard_normal((ms4.basis.shape[0], n)), ms4.gram)
    assert inf_sup(basis, ms4) >= 1.0
