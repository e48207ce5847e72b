"""Chamfer / NRMSE / Recall metrics and the exact point-to-mesh distance."""

import numpy as np
import pytest
from scipy.spatial import cKDTree

from hairfield.fixtures import icosphere
from hairfield.metrics import (
    EvalReport,
    chamfer,
    evaluate,
    mesh_to_points,
    nrmse,
    point_mesh_distance,
    recall,
)
from hairfield.mesh import TriMesh, bbox_diagonal


def cloud(seed, n=300):
    return np.random.default_rng(seed).normal(size=(n, 3))


class TestChamfer:
    def test_identity_zero(self):
        a = cloud(0)
        assert chamfer(a, a) == 0.0

    def test_translation_closed_form(self):
        """Shifting a dense-enough cloud by eps along x gives 2 * eps^2 when
        eps is far below the inter-point spacing."""
        a = cloud(1, n=100) * 10.0
        eps = 1e-3
        b = a + np.array([eps, 0.0, 0.0])
        assert chamfer(a, b) == pytest.approx(2.0 * eps ** 2, abs=1e-10)

    def test_symmetric(self):
        a, b = cloud(2), cloud(3)
        assert chamfer(a, b) == pytest.approx(chamfer(b, a), abs=1e-15)

    def test_matches_brute_force(self):
        a, b = cloud(4, 50), cloud(5, 60)
        d_ab = np.linalg.norm(a[:, None] - b[None], axis=2).min(axis=1)
        d_ba = np.linalg.norm(b[:, None] - a[None], axis=2).min(axis=1)
        expect = (d_ab ** 2).mean() + (d_ba ** 2).mean()
        assert chamfer(a, b) == pytest.approx(expect, abs=1e-12)


class TestNrmse:
    def test_identity_zero(self):
        a = cloud(6)
        assert nrmse(a, a) == 0.0

    def test_translation(self):
        gt = cloud(7, 100) * 10.0
        eps = 1e-3
        pred = gt + np.array([0.0, eps, 0.0])
        assert nrmse(pred, gt) == pytest.approx(eps / bbox_diagonal(gt), rel=1e-9)

    def test_normalized_by_gt_diagonal(self):
        gt = cloud(8)
        pred = cloud(9)
        v1 = nrmse(pred, gt)
        v2 = nrmse(pred * 2.0, gt * 2.0)
        assert v1 == pytest.approx(v2, rel=1e-9)

    def test_degenerate_gt_rejected(self):
        with pytest.raises(ValueError):
            nrmse(cloud(10), np.zeros((5, 3)))


class TestRecall:
    def test_monotone_in_threshold(self):
        pred, gt = cloud(11), cloud(12)
        values = [recall(pred, gt, t) for t in np.linspace(0.01, 2.0, 10)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_limits(self):
        pred, gt = cloud(13), cloud(14)
        assert recall(pred, gt, 1e-12) == 0.0
        assert recall(pred, gt, 1e6) == 1.0

    def test_positive_threshold_required(self):
        with pytest.raises(ValueError):
            recall(cloud(0), cloud(1), 0.0)


class TestKDTreeEquivalence:
    def test_index_equals_brute_force(self):
        a, b = cloud(15, 80), cloud(16, 90)
        d_tree, i_tree = cKDTree(b).query(a)
        dist = np.linalg.norm(a[:, None] - b[None], axis=2)
        assert np.array_equal(i_tree, dist.argmin(axis=1))
        assert np.allclose(d_tree, dist.min(axis=1), atol=1e-12)


class TestEvaluate:
    def test_report_fields_and_default_threshold(self):
        pred, gt = cloud(17), cloud(18)
        rep = evaluate(pred, gt)
        assert rep.threshold == pytest.approx(0.01 * bbox_diagonal(gt))
        assert rep.n_pred == len(pred) and rep.n_gt == len(gt)

    def test_json_round_trip(self):
        rep = evaluate(cloud(19), cloud(20))
        back = EvalReport.from_json(rep.to_json())
        assert back == rep


class TestMeshToPoints:
    def test_vertices_only(self):
        m = icosphere(2)
        assert np.array_equal(mesh_to_points(m), m.vertices)

    def test_surface_samples_on_surface(self):
        m = icosphere(2)
        pts = mesh_to_points(m, surface_samples=500, seed=1)
        assert len(pts) == m.n_vertices + 500
        d = point_mesh_distance(pts[m.n_vertices:], m)
        assert d.max() < 1e-12

    def test_deterministic(self):
        m = icosphere(2)
        a = mesh_to_points(m, surface_samples=100, seed=5)
        b = mesh_to_points(m, surface_samples=100, seed=5)
        assert np.array_equal(a, b)


class TestPointMeshDistance:
    def test_single_triangle_regions(self):
        m = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        pts = np.array([
            [0.25, 0.25, 1.0],   # above the interior -> plane distance
            [-1.0, 0.0, 0.0],    # beyond vertex a -> vertex distance
            [0.5, -2.0, 0.0],    # beyond edge ab -> edge distance
            [1.0, 1.0, 0.0],     # beyond the diagonal edge
        ])
        d = point_mesh_distance(pts, m)
        assert d[0] == pytest.approx(1.0, abs=1e-12)
        assert d[1] == pytest.approx(1.0, abs=1e-12)
        assert d[2] == pytest.approx(2.0, abs=1e-12)
        assert d[3] == pytest.approx(np.sqrt(0.5), abs=1e-12)

    def test_sphere_radial_distance(self):
        m = icosphere(4)
        rng = np.random.default_rng(21)
        dirs = rng.normal(size=(50, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pts = dirs * 2.0
        d = point_mesh_distance(pts, m)
        # distance to the unit icosphere from radius 2 is ~1 (tessellation slack)
        assert np.abs(d - 1.0).max() < 5e-3

    def test_chunking_consistent(self):
        m = icosphere(2)
        pts = cloud(22, 100)
        assert np.array_equal(point_mesh_distance(pts, m, chunk=7),
                              point_mesh_distance(pts, m, chunk=1000))
