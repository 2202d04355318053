import numpy as np
import pytest

from gskit.align.icp import IcpError, IcpParams, icp_align
from gskit.align.marker import MarkerError, MarkerObservation, estimate_scale, parse_marker_file
from gskit.align.robot import align_robot, link_surface_clouds, robot_surface_cloud
from gskit.align.sampling import sample_surface_points
from gskit.align.segment import segment_links_knn
from gskit.assets.mesh import TriangleMesh, box_mesh
from gskit.assets.urdf import parse_kinematic_tree
from gskit.geometry import RigidTransform, quat_from_axis_angle

from conftest import random_gaussian_set


def square_marker(edge=0.2, center=(0, 0, 0), edge_length_m=0.1):
    c = np.asarray(center, dtype=float)
    half = edge / 2
    corners = c + np.array(
        [[-half, -half, 0], [half, -half, 0], [half, half, 0], [-half, half, 0]]
    )
    return MarkerObservation(corners, edge_length_m)


class TestEstimateScale:
    def test_perfect_square_ratio(self):
        result = estimate_scale(square_marker(edge=0.2, edge_length_m=0.1),
                                scene_centroid=[0, 0, 1.0])
        assert result.scale == pytest.approx(0.5, abs=1e-12)

    def test_homogeneity_exact(self):
        marker = square_marker(edge=0.17, edge_length_m=0.1)
        base = estimate_scale(marker, scene_centroid=[0, 0, 1.0]).scale
        for s in (0.1, 2.0, 37.5):
            scaled = MarkerObservation(marker.corner_points * s, marker.edge_length_m)
            assert estimate_scale(scaled, scene_centroid=[0, 0, s]).scale == base / s

    def test_gravity_points_away_from_scene(self):
        result = estimate_scale(square_marker(), scene_centroid=[0, 0, 2.0])
        np.testing.assert_allclose(result.gravity_dir, [0, 0, -1], atol=1e-12)
        np.testing.assert_allclose(result.support_plane.normal, [0, 0, 1], atol=1e-12)
        # scene below the plane flips both
        result = estimate_scale(square_marker(), scene_centroid=[0, 0, -2.0])
        np.testing.assert_allclose(result.gravity_dir, [0, 0, 1], atol=1e-12)

    def test_noisy_corners_monte_carlo(self):
        """2 mm corner noise, true edge 0.10 m: the estimator stays within 1%
        (error of the mean estimate over 100 seeds; per-seed spread is ~1.4%)."""
        true_scale = 1.0
        estimates = []
        for seed in range(100):
            rng = np.random.default_rng((seed, 77))
            marker = square_marker(edge=0.1, edge_length_m=0.1)
            noisy = marker.corner_points + rng.normal(scale=0.002, size=(4, 3))
            est = estimate_scale(MarkerObservation(noisy, 0.1), scene_centroid=[0, 0, 1.0])
            estimates.append(est.scale)
        assert abs(np.mean(estimates) / true_scale - 1.0) < 0.01

    def test_collinear_corners_rejected(self):
        corners = np.array([[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0], [0.3, 0, 0]], dtype=float)
        with pytest.raises(MarkerError):
            estimate_scale(MarkerObservation(corners, 0.1), scene_centroid=[0, 0, 1.0])

    def test_uneven_edges_rejected(self):
        corners = np.array([[0, 0, 0], [1.0, 0, 0], [1.0, 0.5, 0], [0, 0.5, 0]], dtype=float)
        with pytest.raises(MarkerError, match="20%"):
            MarkerObservation(corners, 0.1)

    def test_marker_file_round_trip(self):
        text = "0 0 0\n0.2 0 0\n0.2 0.2 0\n0 0.2 0\nedge_length_m 0.1\n"
        marker = parse_marker_file(text)
        assert marker.edge_length_m == 0.1
        assert marker.corner_points.shape == (4, 3)


class TestSampling:
    def test_points_inside_single_triangle(self):
        mesh = TriangleMesh(
            vertices=np.array([[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]),
            faces=np.array([[0, 1, 2]]),
        )
        pts = sample_surface_points(mesh, 1000, seed=0)
        assert pts.shape == (1000, 3)
        # barycentric check: x >= 0, y >= 0, x + y <= 1, z == 0
        assert (pts[:, 0] >= -1e-12).all() and (pts[:, 1] >= -1e-12).all()
        assert (pts[:, 0] + pts[:, 1] <= 1 + 1e-12).all()
        np.testing.assert_allclose(pts[:, 2], 0, atol=1e-15)

    def test_unit_square_quadrant_counts(self):
        mesh = TriangleMesh(
            vertices=np.array([[0, 0, 0], [1.0, 0, 0], [1.0, 1.0, 0], [0, 1.0, 0]]),
            faces=np.array([[0, 1, 2], [0, 2, 3]]),
        )
        pts = sample_surface_points(mesh, 10_000, seed=1)
        for qx in (0, 1):
            for qy in (0, 1):
                mask = ((pts[:, 0] > 0.5) == qx) & ((pts[:, 1] > 0.5) == qy)
                count = mask.sum()
                # binomial: mean 2500, sigma ~ 43; allow 3 sigma
                assert abs(count - 2500) < 3 * np.sqrt(10_000 * 0.25 * 0.75)

    def test_area_proportional_allocation(self):
        mesh = TriangleMesh(
            vertices=np.array(
                [[0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [3.0, 0, 1.0], [0, 3.0, 1.0], [0, 0, 1.0]]
            ),
            faces=np.array([[0, 1, 2], [5, 3, 4]]),  # areas 0.5 and 4.5 -> ratio 1:9... scaled 1:3^2
        )
        pts = sample_surface_points(mesh, 10_000, seed=2)
        frac_small = (pts[:, 2] < 0.5).mean()
        assert abs(frac_small - 0.1) < 0.02

    def test_deterministic_per_seed(self):
        mesh = box_mesh(0.2)
        np.testing.assert_array_equal(
            sample_surface_points(mesh, 100, seed=5), sample_surface_points(mesh, 100, seed=5)
        )
        assert not np.array_equal(
            sample_surface_points(mesh, 100, seed=5), sample_surface_points(mesh, 100, seed=6)
        )

    def test_empty_mesh_rejected(self):
        with pytest.raises(Exception):
            sample_surface_points(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), int)), 10)


def random_cloud(rng, n=2000):
    """Points on an anisotropic box surface: hollow like real splat-centroid
    clouds, and with no rotational self-symmetry within the tested range."""
    from gskit.align.sampling import sample_surface_points

    return sample_surface_points(box_mesh((0.6, 0.3, 0.16)), n, seed=int(rng.integers(2**31)))


def random_se3(rng, max_angle=np.deg2rad(30), max_trans=0.2):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(-max_angle, max_angle)
    t = rng.uniform(-max_trans, max_trans, size=3)
    return RigidTransform(quat_from_axis_angle(axis, angle), t)


class TestIcp:
    def test_fixpoint_identity(self):
        rng = np.random.default_rng(0)
        cloud = random_cloud(rng)
        result = icp_align(cloud, cloud, init=RigidTransform.identity())
        assert result.transform.almost_equal(RigidTransform.identity(), tol=1e-9)
        assert result.rms_residual <= 1e-12
        assert result.inlier_fraction == 1.0

    def test_recovers_random_se3_noise_free(self):
        errors_rot, errors_trans = [], []
        for seed in range(10):
            rng = np.random.default_rng((seed, 1))
            cloud = random_cloud(rng)
            true = random_se3(rng)
            result = icp_align(cloud, true.apply(cloud), init=RigidTransform.identity())
            errors_rot.append(np.degrees(result.transform.rotation_angle_to(true)))
            errors_trans.append(np.linalg.norm(result.transform.translation - true.translation))
        assert max(errors_rot) < 0.5
        assert max(errors_trans) < 0.002

    def test_noise_reflected_in_rms(self):
        rng = np.random.default_rng(42)
        cloud = random_cloud(rng)
        true = random_se3(rng)
        noisy_target = true.apply(cloud) + rng.normal(scale=0.001, size=cloud.shape)
        result = icp_align(cloud, noisy_target, init=true)  # already aligned: isolate rms
        assert 0.0005 <= result.rms_residual <= 0.004  # ~sqrt(3)*1mm, within 2x

    def test_proper_rotation_always(self):
        for seed in range(10):
            rng = np.random.default_rng((seed, 2))
            cloud = random_cloud(rng, n=500)
            result = icp_align(cloud, random_se3(rng).apply(cloud))
            det = np.linalg.det(result.transform.rotation_matrix())
            assert abs(det - 1.0) <= 1e-9

    def test_dissimilar_clouds_rejected(self):
        # Clouds not related by any rigid motion (scale mismatch): either the
        # annealed cutoff empties out or the trimmed fit degenerates.
        rng = np.random.default_rng(3)
        sphere = rng.normal(size=(200, 3))
        sphere /= np.linalg.norm(sphere, axis=1, keepdims=True)
        with pytest.raises(IcpError, match="cutoff|degenerate"):
            icp_align(0.3 * sphere, 3.0 * sphere, params=IcpParams())

    def test_pure_large_translation_recovered_via_annealing(self):
        rng = np.random.default_rng(8)
        cloud = random_cloud(rng, n=500)
        result = icp_align(cloud, cloud + np.array([10.0, 0, 0]))
        np.testing.assert_allclose(result.transform.translation, [10.0, 0, 0], atol=1e-6)

    def test_collinear_cloud_rejected(self):
        line = np.linspace(0, 1, 50)[:, None] * np.array([[1.0, 0, 0]])
        with pytest.raises(IcpError, match="collinear"):
            icp_align(line, line)

    def test_convergence_uses_few_iterations(self):
        rng = np.random.default_rng(4)
        cloud = random_cloud(rng)
        result = icp_align(cloud, cloud)
        assert result.iterations_used <= 3


GANTRY_SEGMENT = """
<robot name="two_box">
  <link name="base"><visual><geometry><mesh filename="base"/></geometry></visual></link>
  <link name="arm"><visual><geometry><mesh filename="arm"/></geometry></visual></link>
  <joint name="lift" type="prismatic">
    <parent link="base"/><child link="arm"/>
    <origin xyz="0 0 0.2"/><axis xyz="0 0 1"/><limit lower="0" upper="0.5"/>
  </joint>
</robot>
"""


class TestAlignRobot:
    def _mesh_loader(self, ref):
        return {
            "base": box_mesh((0.3, 0.2, 0.2), center=(0, 0, 0.1)),
            "arm": box_mesh((0.08, 0.08, 0.4), center=(0, 0, 0.2)),
        }[ref]

    def test_synthetic_twin_recovery(self):
        tree = parse_kinematic_tree(GANTRY_SEGMENT)
        q_cap = np.array([0.1])
        rng = np.random.default_rng(0)
        true = random_se3(rng, max_angle=np.deg2rad(20), max_trans=0.15)

        # Synthesize the "reconstruction": robot surface points posed by the
        # true transform, wrapped in a splat set.
        world = robot_surface_cloud(tree, q_cap, self._mesh_loader, total_points=3000, seed=9)
        scan = random_gaussian_set(np.random.default_rng(1), world.shape[0])
        scan.centroids[:] = true.apply(world)
        scan.opacities_logit[:] = 3.0

        result = align_robot(scan, tree, q_cap, mesh_loader=self._mesh_loader,
                             total_points=3000, seed=9)
        assert np.degrees(result.transform.rotation_angle_to(true)) < 0.1
        assert np.linalg.norm(result.transform.translation - true.translation) < 1e-3

    def test_converges_from_offset_init(self):
        tree = parse_kinematic_tree(GANTRY_SEGMENT)
        q_cap = np.array([0.1])
        world = robot_surface_cloud(tree, q_cap, self._mesh_loader, total_points=3000, seed=9)
        scan = random_gaussian_set(np.random.default_rng(1), world.shape[0])
        scan.centroids[:] = world
        scan.opacities_logit[:] = 3.0

        init = RigidTransform(
            quat_from_axis_angle([0, 0, 1.0], np.deg2rad(15)), (0.1, 0.0, 0.0)
        )
        result = align_robot(scan, tree, q_cap, init=init, mesh_loader=self._mesh_loader,
                             total_points=3000, seed=9,)
        assert np.degrees(result.transform.rotation_angle_to(RigidTransform.identity())) < 0.5
        assert np.linalg.norm(result.transform.translation) < 0.005

    def test_empty_cloud_rejected(self):
        tree = parse_kinematic_tree(GANTRY_SEGMENT)
        scan = random_gaussian_set(np.random.default_rng(0), 10)
        scan.opacities_logit[:] = -10.0  # everything below the opacity floor
        with pytest.raises(IcpError, match="empty"):
            align_robot(scan, tree, np.array([0.0]), mesh_loader=self._mesh_loader)


class TestSegmentation:
    def test_exact_point_gets_link_label(self):
        clouds = [np.array([[0, 0, 0.0]]), np.array([[1.0, 0, 0]])]
        labels = segment_links_knn(np.array([[1.0, 0, 0]]), clouds, k=1, cutoff=0.05)
        np.testing.assert_array_equal(labels, [1])

    def test_far_splat_is_background(self):
        clouds = [np.array([[0, 0, 0.0]])]
        labels = segment_links_knn(np.array([[1.0, 0, 0]]), clouds, k=1, cutoff=0.02)
        np.testing.assert_array_equal(labels, [-1])

    def test_two_parallel_surfaces(self):
        """Two link planes 5 cm apart, splats within 1 mm of each: >= 99% accuracy."""
        rng = np.random.default_rng(0)
        n = 2000
        xy = rng.uniform(-0.2, 0.2, size=(n, 2))
        lower = np.concatenate([xy, np.zeros((n, 1))], axis=1)
        upper = np.concatenate([xy, np.full((n, 1), 0.05)], axis=1)
        clouds = [lower, upper]

        m = 1000
        queries, truth = [], []
        for plane_z, label in ((0.0, 0), (0.05, 1)):
            q = np.concatenate(
                [rng.uniform(-0.2, 0.2, size=(m, 2)), np.full((m, 1), plane_z)], axis=1
            )
            q += rng.normal(scale=0.001, size=q.shape)
            queries.append(q)
            truth.append(np.full(m, label))
        labels = segment_links_knn(np.concatenate(queries), clouds, k=5, cutoff=0.02)
        accuracy = (labels == np.concatenate(truth)).mean()
        assert accuracy >= 0.99

    def test_permutation_invariance_and_determinism(self):
        rng = np.random.default_rng(1)
        clouds = [rng.uniform(size=(50, 3)), rng.uniform(size=(50, 3)) + 0.5]
        queries = rng.uniform(size=(100, 3))
        labels = segment_links_knn(queries, clouds, k=3, cutoff=0.5)
        perm = rng.permutation(100)
        labels_perm = segment_links_knn(queries[perm], clouds, k=3, cutoff=0.5)
        np.testing.assert_array_equal(labels[perm], labels_perm)
        np.testing.assert_array_equal(labels, segment_links_knn(queries, clouds, k=3, cutoff=0.5))

    def test_empty_link_clouds_rejected(self):
        with pytest.raises(ValueError):
            segment_links_knn(np.zeros((1, 3)), [np.zeros((0, 3))], k=1, cutoff=0.1)

    def test_majority_vote_with_tie_break(self):
        # k=2, one neighbor from each link equidistant-ish: closer mean wins
        clouds = [np.array([[0, 0, 0.0]]), np.array([[0.01, 0, 0]])]
        labels = segment_links_knn(np.array([[0.004, 0, 0]]), clouds, k=2, cutoff=0.05)
        np.testing.assert_array_equal(labels, [0])
