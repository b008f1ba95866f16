import numpy as np
import pytest

from scanmesh.delaunay import delaunay_2d
from scanmesh.geometry import PlaneStats, PoseSE3
from scanmesh.map import MapConfig, MeshMap, ScanFrame, TriangleFacet
from scanmesh.mesher import (MeshIntegrityError, lift_and_orient, mesh_commit,
                             mesh_pull, mesh_push, mesh_update, project_to_plane,
                             retrieve_vertices, VoxelMeshDelta, _process_voxel)


def make_map(**overrides):
    return MeshMap(MapConfig.preset("solid_state", **overrides))


def register(m, pts, ts=0.0, pose=None):
    return m.register_scan(ScanFrame(ts, np.asarray(pts, dtype=float),
                                     pose or PoseSE3.identity()))


class TestRetrieveVertices:
    def test_isolated_vertex(self):
        m = make_map()
        register(m, [[0.2, 0.2, 0.2]])
        voxel = m.voxels[m.voxel_key(np.array([0.2, 0.2, 0.2]))]
        assert retrieve_vertices(m, voxel) == [0]

    def test_dilation_symmetric_across_voxel_face(self):
        # spacing filter at 0.05 keeps both; 0.06 m gap < dilation radius 0.10
        m = MeshMap(MapConfig(min_vertex_spacing=0.05, voxel_size=0.4,
                              region_size=10.0))
        register(m, [[0.37, 0.2, 0.2], [0.43, 0.2, 0.2]])
        va = m.voxels[m.voxel_key(np.array([0.37, 0.2, 0.2]))]
        vb = m.voxels[m.voxel_key(np.array([0.43, 0.2, 0.2]))]
        assert retrieve_vertices(m, va) == [0, 1]
        assert retrieve_vertices(m, vb) == [0, 1]

    def test_matches_brute_force_union(self, rng):
        m = make_map()
        register(m, rng.uniform(0, 1.2, (400, 3)))
        positions = np.array([v.pos for v in m.vertices])
        d_r = m.config.dilation_radius
        for key, voxel in list(m.voxels.items())[:10]:
            if not voxel.vertex_ids:
                continue
            want = set(voxel.vertex_ids)
            for vid in voxel.vertex_ids:
                d = np.linalg.norm(positions - positions[vid], axis=1)
                want.update(np.nonzero(d <= d_r)[0].tolist())
            assert retrieve_vertices(m, voxel) == sorted(want)

    def test_empty_voxel(self):
        m = make_map()
        voxel = m.get_or_create_voxel(np.zeros(3))
        assert retrieve_vertices(m, voxel) == []


class TestProjectToPlane:
    def test_center_maps_to_origin(self, rng):
        pts = rng.normal(size=(20, 3)) * [1, 1, 0.01]
        stats = PlaneStats.from_points(pts)
        proj = project_to_plane(stats.mean.reshape(1, 3).repeat(3, axis=0), stats)
        assert np.allclose(proj, 0.0, atol=1e-12)

    def test_basis_alignment(self, rng):
        pts = rng.normal(size=(50, 3)) * [2, 1, 0.001]
        stats = PlaneStats.from_points(pts)
        u1 = stats.eigenvectors[:, 0]
        proj = project_to_plane(np.vstack([stats.mean + u1] * 3), stats)
        assert np.allclose(proj[0], [1.0, 0.0], atol=1e-9)

    def test_coplanar_isometry(self, rng):
        # distances between coplanar points survive the projection
        basis = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        pts2d = rng.normal(size=(30, 2))
        pts = pts2d @ basis[:, :2].T + rng.normal(size=3)
        stats = PlaneStats.from_points(pts)
        proj = project_to_plane(pts, stats)
        d3 = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        d2 = np.linalg.norm(proj[:, None] - proj[None, :], axis=2)
        assert np.allclose(d2, d3, atol=1e-9)

    def test_degenerate_too_few(self):
        with pytest.raises(Exception):
            project_to_plane(np.zeros((2, 3)), PlaneStats())


class TestLiftAndOrient:
    POSITIONS = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])

    def test_facing_rule(self):
        facets = lift_and_orient([(0, 1, 2)], [10, 11, 12], self.POSITIONS,
                                 np.array([0.0, 0.0, 5.0]))
        facet = facets[(10, 11, 12)]
        assert np.allclose(facet.normal, [0, 0, 1])
        assert np.allclose(facet.center, self.POSITIONS.mean(axis=0))

    def test_flip_swaps_published_order(self):
        above = lift_and_orient([(0, 1, 2)], [10, 11, 12], self.POSITIONS,
                                np.array([0.0, 0.0, 5.0]))[(10, 11, 12)]
        below = lift_and_orient([(0, 1, 2)], [10, 11, 12], self.POSITIONS,
                                np.array([0.0, 0.0, -5.0]))[(10, 11, 12)]
        assert np.allclose(below.normal, -above.normal)
        assert np.allclose(below.normal, [0, 0, -1])
        # exactly one of the two orientations swaps the first two ids
        assert {above.published_order, below.published_order} == \
            {(10, 11, 12), (11, 10, 12)}
        assert above.published_order != below.published_order

    def test_zero_area_rejected(self):
        flat = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        assert lift_and_orient([(0, 1, 2)], [0, 1, 2], flat, np.ones(3)) == {}

    def test_dot_sign_invariant_random(self, rng):
        for _ in range(10_000):
            pos = rng.normal(size=(3, 3))
            sensor = rng.normal(size=3) * 4
            facets = lift_and_orient([(0, 1, 2)], [0, 1, 2], pos, sensor)
            for facet in facets.values():
                assert np.dot(sensor - facet.center, facet.normal) >= 0

    def test_keys_sorted_by_global_id(self):
        facets = lift_and_orient([(2, 0, 1)], [30, 10, 20], self.POSITIONS,
                                 np.ones(3))
        assert list(facets.keys()) == [(10, 20, 30)]


class TestPullCommitPush:
    def test_pull_empty_map(self):
        m = make_map()
        register(m, [[0.1, 0.1, 0.1]])
        assert mesh_pull(m, {0}) == set()

    def test_pull_includes_fully_contained_facet(self):
        m = make_map()
        register(m, [[0.05, 0.05, 0.0], [0.17, 0.05, 0.0], [0.05, 0.17, 0.0]])
        facet = TriangleFacet((0, 1, 2), np.zeros(3), np.array([0, 0, 1.0]),
                              (0, 1, 2))
        mesh_push(m, VoxelMeshDelta(to_add={(0, 1, 2): facet}))
        assert mesh_pull(m, {0, 1, 2}) == {(0, 1, 2)}
        # only 2 of 3 vertices retrieved -> excluded, matching a global scan
        assert mesh_pull(m, {0, 1}) == set()

    def test_pull_matches_global_scan(self, rng):
        m = make_map()
        register(m, rng.uniform(0, 1, (200, 3)))
        mesh_update(m, sensor_pos=np.array([0.5, 0.5, 5.0]))
        ids = set(rng.choice(len(m.vertices), 60, replace=False).tolist())
        want = {key for key, _ in m.facets.items()
                if all(v in ids for v in key)}
        assert mesh_pull(m, ids) == want

    def test_commit_fixed_point(self):
        facet = TriangleFacet((0, 1, 2), np.zeros(3), np.array([0, 0, 1.0]),
                              (0, 1, 2))
        delta = mesh_commit({(0, 1, 2): facet}, {(0, 1, 2)})
        assert delta.to_add == {} and delta.to_erase == set()

    def test_commit_first_meshing(self):
        facet = TriangleFacet((0, 1, 2), np.zeros(3), np.array([0, 0, 1.0]),
                              (0, 1, 2))
        delta = mesh_commit({(0, 1, 2): facet}, set())
        assert set(delta.to_add) == {(0, 1, 2)} and delta.to_erase == set()

    def test_commit_matches_set_algebra(self, rng):
        for _ in range(50):
            fresh_keys = {tuple(sorted(rng.choice(30, 3, replace=False).tolist()))
                          for _ in range(15)}
            pulled = {tuple(sorted(rng.choice(30, 3, replace=False).tolist()))
                      for _ in range(15)}
            fresh = {k: TriangleFacet(k, np.zeros(3), np.array([0, 0, 1.0]), k)
                     for k in fresh_keys}
            delta = mesh_commit(fresh, pulled)
            assert set(delta.to_add) == fresh_keys - pulled
            assert delta.to_erase == pulled - fresh_keys
            assert set(delta.to_add).isdisjoint(delta.to_erase)

    def test_push_add_then_erase_restores_baseline(self):
        m = make_map()
        register(m, [[0.05, 0.05, 0.0], [0.17, 0.05, 0.0], [0.05, 0.17, 0.0]])
        key = (0, 1, 2)
        center = np.array([0.09, 0.09, 0.0])
        facet = TriangleFacet(key, center, np.array([0, 0, 1.0]), key)
        mesh_push(m, VoxelMeshDelta(to_add={key: facet}))
        assert len(m.facets) == 1
        assert key in m.vertices[0].tri_list
        region = m.regions[m.region_key(center)]
        assert key in region.facets and region.sync_required
        mesh_push(m, VoxelMeshDelta(to_erase={key}))
        assert len(m.facets) == 0
        assert all(not v.tri_list for v in m.vertices)
        assert key not in region.facets

    def test_push_erase_missing_is_hard_error(self):
        m = make_map()
        register(m, [[0.1, 0.1, 0.1]])
        with pytest.raises(MeshIntegrityError):
            mesh_push(m, VoxelMeshDelta(to_erase={(0, 1, 2)}))

    def test_facet_lands_in_center_region(self, rng):
        m = make_map()
        register(m, rng.uniform(-3, 3, (400, 3)))
        mesh_update(m, sensor_pos=np.zeros(3))
        for key, facet in m.facets.items():
            region = m.regions[m.region_key(facet.center)]
            assert key in region.facets

    def test_integrity_after_updates(self, rng):
        m = make_map()
        for i in range(3):
            register(m, rng.uniform(-1.5, 1.5, (400, 3)), ts=float(i))
            mesh_update(m, sensor_pos=rng.uniform(-1, 1, 3))
        assert m.check_integrity() == []


class TestMeshUpdate:
    def test_no_activated_voxels_no_change(self):
        m = make_map()
        register(m, [[0.1, 0.1, 0.1]])
        mesh_update(m, sensor_pos=np.zeros(3))
        baseline = len(m.facets)
        report = mesh_update(m, sensor_pos=np.zeros(3))
        assert report.processed_keys == [] and len(m.facets) == baseline

    def test_single_voxel_matches_delaunay_recompute(self, rng):
        m = make_map()
        pts = np.column_stack([rng.uniform(0.02, 0.38, (8, 2)),
                               np.full(8, 0.2)])
        register(m, pts)
        sensor = np.array([0.2, 0.2, 5.0])
        mesh_update(m, sensor_pos=sensor)
        voxel = m.voxels[m.voxel_key(pts[0])]
        ids = retrieve_vertices(m, voxel)
        positions = np.array([m.vertices[v].pos for v in ids])
        proj = project_to_plane(positions, voxel.stats)
        triples = delaunay_2d(proj)
        want = {tuple(sorted(ids[t] for t in tri)) for tri in triples}
        assert {k for k, _ in m.facets.items()} == want

    def test_adjacent_voxels_match_sequential_processing(self, rng):
        pts = rng.uniform(0, 0.8, (300, 3)) * np.array([1.0, 1.0, 0.05])
        sensor = np.array([0.4, 0.4, 4.0])

        m1 = make_map()
        register(m1, pts)
        mesh_update(m1, sensor_pos=sensor, workers=1)

        m2 = make_map()
        rep = register(m2, pts)
        # sequential: push each voxel's delta immediately, one at a time
        for key in sorted(rep.activated_voxel_keys):
            result = _process_voxel(m2, key, sensor)
            if result is not None:
                mesh_push(m2, result[1])
            m2.voxels[key].activated = False
        keys1 = {k for k, _ in m1.facets.items()}
        keys2 = {k for k, _ in m2.facets.items()}
        assert keys1 == keys2

    def test_worker_count_does_not_change_result(self, rng):
        pts = rng.uniform(-1, 1, (600, 3))
        results = []
        for workers in (1, 2, 8):
            m = make_map()
            register(m, pts)
            mesh_update(m, sensor_pos=np.zeros(3), workers=workers)
            results.append(sorted(k for k, _ in m.facets.items()))
        assert results[0] == results[1] == results[2]

    def test_skips_degenerate_voxels(self):
        m = make_map()
        register(m, [[0.1, 0.1, 0.1], [0.32, 0.1, 0.1]])  # 2 points, one voxel
        report = mesh_update(m, sensor_pos=np.zeros(3))
        assert report.processed_keys == []
        assert len(report.skipped_keys) == 1
        assert not m.voxels[report.skipped_keys[0]].activated

    def test_post_pass_pull_equals_fresh_output(self, rng):
        m = make_map()
        register(m, rng.uniform(0, 1.5, (500, 3)) * np.array([1, 1, 0.08]))
        sensor = np.array([0.7, 0.7, 6.0])
        report = mesh_update(m, sensor_pos=sensor)
        for key in report.processed_keys:
            result = _process_voxel(m, key, sensor)
            assert result is not None
            fresh, _ = result
            ids = retrieve_vertices(m, m.voxels[key])
            assert mesh_pull(m, ids) == set(fresh.keys())

    def test_deactivates_all_processed(self, rng):
        m = make_map()
        register(m, rng.uniform(-1, 1, (300, 3)))
        mesh_update(m, sensor_pos=np.zeros(3))
        assert m.activated_voxel_keys() == []
