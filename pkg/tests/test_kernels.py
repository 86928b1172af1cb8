"""The compiled and pure-Python kernels must agree on every entry point."""

import importlib

import numpy as np
import pytest

from medianlab import _pykernels as py

try:
    cy = importlib.import_module("medianlab._ckernels")
except ImportError:
    cy = None

pytestmark = pytest.mark.skipif(cy is None, reason="compiled kernels not built")

QS = [1.0, 1.5, 2.0, 3.7, np.inf]


@pytest.fixture
def cloud():
    rng = np.random.default_rng(11)
    pts = np.ascontiguousarray(rng.normal(size=(40, 3)))
    w = np.ascontiguousarray(rng.uniform(0.5, 2.0, size=40))
    return pts, w


@pytest.mark.parametrize("q", QS)
def test_norms_agree(cloud, q):
    pts, _ = cloud
    for row in pts:
        assert cy.lq_norm(row, q) == pytest.approx(py.lq_norm(row, q), rel=1e-14)


@pytest.mark.parametrize("q", QS)
def test_distances_and_cost_agree(cloud, q):
    pts, w = cloud
    f = np.ascontiguousarray([0.1, -0.2, 0.3])
    np.testing.assert_allclose(cy.distances(pts, f, q), py.distances(pts, f, q), rtol=1e-14)
    assert cy.social_cost(pts, w, f, q) == pytest.approx(py.social_cost(pts, w, f, q), rel=1e-14)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.7])
def test_smoothed_gradient_agrees(cloud, q):
    pts, w = cloud
    f = np.ascontiguousarray([0.1, -0.2, 0.3])
    c1, g1 = cy.smoothed_cost_grad(pts, w, f, q, 1e-9)
    c2, g2 = py.smoothed_cost_grad(pts, w, f, q, 1e-9)
    assert c1 == pytest.approx(c2, rel=1e-13)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("upper", [False, True])
def test_weighted_median_agrees(cloud, upper):
    pts, w = cloud
    np.testing.assert_array_equal(cy.weighted_median(pts, w, upper), py.weighted_median(pts, w, upper))
    ones = np.ones(len(pts))
    np.testing.assert_array_equal(cy.weighted_median(pts, ones, upper), py.weighted_median(pts, ones, upper))


@pytest.mark.parametrize("q", [1.0, 2.0, np.inf])
def test_grid_min_agrees(cloud, q):
    pts, w = cloud
    pts = np.ascontiguousarray(pts[:6, :2])
    lo = np.array([-2.0, -2.0])
    counts = np.array([81, 81], dtype=np.int64)
    p1, c1 = cy.grid_min(pts, w[:6].copy(), lo, 0.05, counts, q)
    p2, c2 = py.grid_min(pts, w[:6].copy(), lo, 0.05, counts, q)
    assert c1 == pytest.approx(c2, rel=1e-13)
    np.testing.assert_allclose(p1, p2, atol=1e-12)


def test_weiszfeld_agrees(cloud):
    pts, w = cloud
    x0 = np.ascontiguousarray(pts.mean(axis=0))
    x1, _ = cy.weiszfeld(pts, w, x0, 1e-12, 500, 1e-14)
    x2, _ = py.weiszfeld(pts, w, x0.copy(), 1e-12, 500, 1e-14)
    np.testing.assert_allclose(x1, x2, atol=1e-10)
