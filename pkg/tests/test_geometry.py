import numpy as np
import pytest

from scanmesh.geometry import (PlaneStats, PoseSE3, eig_sym3, point3,
                               transform_point)

from conftest import random_rotation


class TestTransformPoint:
    def test_identity(self):
        p = transform_point(PoseSE3.identity(), point3(1, 2, 3))
        assert np.allclose(p, [1, 2, 3])

    def test_quarter_turn_about_z(self):
        c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
        pose = PoseSE3(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]), np.zeros(3))
        assert np.allclose(transform_point(pose, point3(1, 0, 0)), [0, 1, 0])

    def test_against_homogeneous_matrix_oracle(self, rng):
        for _ in range(50):
            pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
            p = rng.normal(size=3)
            hom = pose.as_matrix() @ np.append(p, 1.0)
            assert np.allclose(transform_point(pose, p), hom[:3], atol=1e-12)

    def test_isometry(self, rng):
        pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
        for _ in range(100):
            a, b = rng.normal(size=3), rng.normal(size=3)
            d0 = np.linalg.norm(a - b)
            d1 = np.linalg.norm(pose.apply(a) - pose.apply(b))
            assert abs(d0 - d1) < 1e-9

    def test_batch_matches_single(self, rng):
        pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
        pts = rng.normal(size=(10, 3))
        batch = pose.apply(pts)
        for i in range(10):
            assert np.allclose(batch[i], pose.apply(pts[i]))

    def test_invalid_rotation_detected(self):
        pose = PoseSE3(np.eye(3) * 2.0, np.zeros(3))
        assert not pose.is_valid()
        refl = PoseSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        assert not refl.is_valid()

    def test_quaternion_round_trip(self, rng):
        for _ in range(20):
            pose = PoseSE3(random_rotation(rng), rng.normal(size=3))
            q = pose.as_quaternion()
            back = PoseSE3.from_quaternion(*q, pose.translation)
            assert np.allclose(back.rotation, pose.rotation, atol=1e-9)


class TestPlaneStats:
    def test_single_point(self):
        stats = PlaneStats.from_points(np.array([[1.0, 2.0, 3.0]]))
        assert np.allclose(stats.mean, [1, 2, 3])
        assert np.allclose(stats.covariance, 0.0)

    def test_empty_is_zero_by_convention(self):
        stats = PlaneStats()
        assert np.allclose(stats.mean, 0.0)
        assert np.allclose(stats.covariance, 0.0)

    def test_planar_points_have_zero_min_eigval(self, rng):
        pts = np.zeros((60, 3))
        pts[:, :2] = rng.normal(size=(60, 2))
        stats = PlaneStats.from_points(pts)
        assert abs(stats.eigenvalues[2]) < 1e-9
        assert np.allclose(np.abs(stats.normal), [0, 0, 1], atol=1e-9)

    def test_incremental_equals_batch(self, rng):
        pts = rng.normal(size=(100, 3))
        inc = PlaneStats()
        inc.update(pts[:37])
        inc.update(pts[37:])
        batch = PlaneStats.from_points(pts)
        assert np.allclose(inc.mean, batch.mean, atol=1e-9)
        assert np.allclose(inc.covariance, batch.covariance, atol=1e-9)

    def test_order_independent(self, rng):
        pts = rng.normal(size=(80, 3))
        a = PlaneStats.from_points(pts)
        perm = rng.permutation(80)
        b = PlaneStats()
        split = 29
        b.update(pts[perm[:split]])
        b.update(pts[perm[split:]])
        assert np.allclose(a.mean, b.mean, atol=1e-9)
        assert np.allclose(a.covariance, b.covariance, atol=1e-9)

    def test_invariants_on_random_data(self, rng):
        stats = PlaneStats.from_points(rng.normal(size=(50, 3)))
        w, v = stats.eigenvalues, stats.eigenvectors
        assert w[0] >= w[1] >= w[2] >= -1e-9
        assert np.allclose(v.T @ v, np.eye(3), atol=1e-9)
        for i in range(3):
            assert np.allclose(stats.covariance @ v[:, i], w[i] * v[:, i],
                               atol=1e-6 * max(1.0, abs(w[i])))


class TestEigSym3:
    def test_identity(self):
        w, v = eig_sym3(np.eye(3))
        assert np.allclose(w, 1.0)
        assert np.allclose(v.T @ v, np.eye(3), atol=1e-9)

    def test_diagonal(self):
        w, v = eig_sym3(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(w, [3, 2, 1])
        assert np.allclose(np.abs(v), np.eye(3), atol=1e-9)

    def test_reconstruction_oracle(self, rng):
        for _ in range(50):
            m = rng.normal(size=(3, 3))
            a = (m + m.T) / 2.0
            w, v = eig_sym3(a)
            assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-6)
            assert w[0] >= w[1] >= w[2]

    def test_trace_property(self, rng):
        for _ in range(20):
            m = rng.normal(size=(3, 3))
            a = (m + m.T) / 2.0
            w, _ = eig_sym3(a)
            assert abs(np.trace(a) - w.sum()) < 1e-9 * max(1.0, abs(np.trace(a)))

    def test_rejects_asymmetric(self):
        bad = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(ValueError):
            eig_sym3(bad)

    def test_sign_convention_deterministic(self, rng):
        m = rng.normal(size=(3, 3))
        a = (m + m.T) / 2.0
        _, v1 = eig_sym3(a)
        _, v2 = eig_sym3(a.copy())
        assert np.array_equal(v1, v2)
