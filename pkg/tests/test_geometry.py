import numpy as np
import pytest

from rigidrecover.errors import (
    CoincidentPoint,
    DegenerateConfiguration,
    LabelMismatch,
    WrongKind,
)
from rigidrecover.geometry import (
    FrameObservation,
    PoseParams,
    RigidBodyModel,
    SegmentLengthSet,
    procrustes_align,
    project_orthogonal,
    project_perspective,
    shape_distance,
    view_angle,
)
from conftest import angle_between, random_rotation, rotation_from_quat


def body_of(points, labels=None):
    pts = np.asarray(points, dtype=float)
    labels = labels or tuple("ABCDEFG"[: len(pts)])
    return RigidBodyModel(labels, pts)


class TestProjectOrthogonal:
    def test_identity_pose(self):
        obs = project_orthogonal(body_of([[1, 2, 3]]), PoseParams.identity())
        assert np.allclose(obs.vector("A"), [1, 2])

    def test_quarter_turn_about_x(self):
        rot = np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
        obs = project_orthogonal(body_of([[0, 0, 1]]), PoseParams(rot, np.zeros(3)))
        assert np.allclose(obs.vector("A"), [0, -1])

    def test_projection_shortens_segments(self, rng):
        for _ in range(100):
            body = body_of(rng.uniform(-1, 1, (4, 3)))
            pose = PoseParams(random_rotation(rng), rng.uniform(-1, 1, 3))
            obs = project_orthogonal(body, pose)
            true = body.pairwise_sq_lengths()
            proj = obs.projected_sq_lengths()
            for pair in true:
                assert proj[pair] <= true[pair] + 1e-12

    def test_depth_translation_has_no_image_effect(self, rng):
        body = body_of(rng.uniform(-1, 1, (3, 3)))
        rot = random_rotation(rng)
        a = project_orthogonal(body, PoseParams(rot, np.array([0.3, -0.1, 0.0])))
        b = project_orthogonal(body, PoseParams(rot, np.array([0.3, -0.1, 7.5])))
        assert np.array_equal(a.coords, b.coords)


class TestProjectPerspective:
    def test_on_axis_point(self):
        obs = project_perspective(body_of([[0, 0, 5]]), PoseParams.identity())
        assert np.allclose(obs.vector("A"), [0, 0, 1])

    def test_collinear_points_share_a_ray(self):
        body = body_of([[0, 0, 2], [0, 0, 5]], labels=("P", "Q"))
        obs = project_perspective(body, PoseParams.identity())
        assert np.allclose(obs.vector("P"), obs.vector("Q"), atol=1e-15)

    def test_ray_angles_match_world_angles(self, rng):
        for _ in range(25):
            body = body_of(rng.uniform(-1, 1, (4, 3)))
            focal = rng.uniform(2.5, 4.0) * rng.standard_normal(3)
            focal /= max(np.linalg.norm(focal) / 3.5, 1e-9)
            pose = PoseParams(random_rotation(rng), focal)
            obs = project_perspective(body, pose)
            for p, q in (("A", "B"), ("A", "C"), ("C", "D")):
                world = angle_between(body.point(p) - focal, body.point(q) - focal)
                assert view_angle(obs, p, q) == pytest.approx(world, abs=1e-12)

    def test_coincident_point_rejected(self):
        body = body_of([[1, 1, 1]])
        with pytest.raises(CoincidentPoint):
            project_perspective(body, PoseParams(np.eye(3), np.array([1, 1, 1.0])))


class TestViewAngle:
    def test_identical_and_opposite_rays(self):
        rays = np.array([[0, 0, 1], [0, 0, 1], [0, 0, -1.0]])
        obs = FrameObservation("perspective", ("P", "Q", "R"), rays)
        assert view_angle(obs, "P", "Q") == pytest.approx(0.0, abs=1e-12)
        assert view_angle(obs, "P", "R") == pytest.approx(np.pi, abs=1e-12)

    def test_wrong_kind(self):
        obs = FrameObservation("orthogonal", ("P",), np.array([[0.0, 0.0]]))
        with pytest.raises(WrongKind):
            view_angle(obs, "P", "P")


class TestProcrustes:
    def test_identity(self, rng):
        pts = rng.uniform(-1, 1, (5, 3))
        pose, res = procrustes_align(pts, pts)
        assert res == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(pose.rotation, np.eye(3), atol=1e-12)
        assert np.allclose(pose.translation, 0.0, atol=1e-12)

    def test_recovers_known_motion(self, rng):
        src = rng.uniform(-1, 1, (6, 3))
        rot = random_rotation(rng)
        trans = rng.uniform(-2, 2, 3)
        pose, res = procrustes_align(src, src @ rot.T + trans)
        assert res < 1e-10
        assert np.abs(pose.rotation - rot).max() < 1e-10
        assert np.allclose(pose.translation, trans, atol=1e-10)

    def test_reflected_target_gets_best_proper_fit(self, rng):
        src = np.array(
            [[0.0, 0, 0], [1.0, 0, 0], [0.2, 0.9, 0], [0.4, 0.3, 1.1]]
        )
        tgt = src * np.array([1.0, 1.0, -1.0])
        pose, res = procrustes_align(src, tgt)
        assert np.linalg.det(pose.rotation) == pytest.approx(1.0, abs=1e-12)
        assert res > 0.05
        # brute force: no sampled proper rotation beats the returned one
        def cost(rot):
            moved = src @ rot.T
            moved = moved - moved.mean(axis=0) + tgt.mean(axis=0)
            return np.sqrt(np.mean(np.sum((moved - tgt) ** 2, axis=1)))

        assert all(cost(random_rotation(rng)) >= res - 1e-12 for _ in range(500))

    def test_collinear_sources_rejected(self):
        src = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0.0]])
        with pytest.raises(DegenerateConfiguration):
            procrustes_align(src, src)


class TestShapeDistance:
    def test_scale_invariance(self, rng):
        body = body_of(rng.uniform(-1, 1, (5, 3)))
        scaled = RigidBodyModel(body.labels, body.points * 3.7)
        assert shape_distance(body, scaled) == pytest.approx(0.0, abs=1e-12)

    def test_mirror_is_zero(self, rng):
        body = body_of(rng.uniform(-1, 1, (4, 3)))
        mirrored = RigidBodyModel(body.labels, body.points * [1, 1, -1])
        assert shape_distance(body, mirrored) == pytest.approx(0.0, abs=1e-12)

    def test_square_vs_rectangle_value(self):
        square = body_of([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        rect = body_of([[0, 0, 0], [1, 0, 0], [1, 2, 0], [0, 2, 0]])
        # hand computation: the square's sorted distances are (1,1,1,1,s2,s2)
        # with norm sqrt(8); the rectangle's are (1,1,2,2,s5,s5), norm sqrt(20)
        u = np.array([1, 1, 1, 1, np.sqrt(2), np.sqrt(2)]) / np.sqrt(8)
        v = np.array([1, 1, 2, 2, np.sqrt(5), np.sqrt(5)]) / np.sqrt(20)
        expected = float(np.linalg.norm(u - v))
        assert expected > 0.2
        assert shape_distance(square, rect) == pytest.approx(expected, abs=1e-12)

    def test_isometry_plus_scale_is_zero(self, rng):
        body = body_of(rng.uniform(-1, 1, (5, 3)))
        moved = RigidBodyModel(
            body.labels, 2.2 * (body.points @ random_rotation(rng).T) + [4, 5, 6]
        )
        assert shape_distance(body, moved) == pytest.approx(0.0, abs=1e-9)

    def test_symmetry_and_nonnegativity(self, rng):
        a = body_of(rng.uniform(-1, 1, (4, 3)))
        b = body_of(rng.uniform(-1, 1, (4, 3)))
        assert shape_distance(a, b) == shape_distance(b, a) >= 0.0

    def test_label_mismatch(self):
        a = body_of([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        b = body_of([[0, 0, 0], [1, 0, 0], [0, 1, 0]], labels=("X", "Y", "Z"))
        with pytest.raises(LabelMismatch):
            shape_distance(a, b)


class TestRelativePose:
    def test_identity_base(self, rng):
        from rigidrecover.geometry import relative_pose

        other = PoseParams(random_rotation(rng), rng.uniform(-1, 1, 3))
        rel = relative_pose(PoseParams.identity(), other)
        assert np.allclose(rel.rotation, other.rotation)
        assert np.allclose(rel.translation, other.translation)

    def test_composition_round_trip(self, rng):
        from rigidrecover.geometry import relative_pose

        base = PoseParams(random_rotation(rng), rng.uniform(-1, 1, 3))
        other = PoseParams(random_rotation(rng), rng.uniform(-1, 1, 3))
        rel = relative_pose(base, other)
        assert np.allclose(base.rotation @ rel.rotation, other.rotation, atol=1e-12)
        assert np.allclose(
            base.rotation @ rel.translation + base.translation,
            other.translation,
            atol=1e-12,
        )


class TestValueTypes:
    def test_rotation_must_be_orthonormal(self):
        with pytest.raises(ValueError):
            PoseParams(np.eye(3) * 1.001, np.zeros(3))

    def test_rotation_must_be_proper(self):
        with pytest.raises(ValueError):
            PoseParams(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_rays_must_be_unit(self):
        with pytest.raises(ValueError):
            FrameObservation("perspective", ("P",), np.array([[0.0, 0.0, 0.9]]))

    def test_labels_must_be_unique(self):
        with pytest.raises(ValueError):
            RigidBodyModel(("A", "A"), np.zeros((2, 3)))

    def test_segment_lengths_must_be_positive(self):
        with pytest.raises(ValueError):
            SegmentLengthSet({("A", "B"): 0.0})

    def test_segment_lengths_vs_projection(self, rng):
        body = body_of(rng.uniform(-1, 1, (3, 3)))
        pose = PoseParams(random_rotation(rng), np.zeros(3))
        obs = project_orthogonal(body, pose)
        lengths = SegmentLengthSet(body.pairwise_sq_lengths())
        lengths.check_against(obs)  # true >= projected, never raises
        shrunk = SegmentLengthSet(
            {k: v * 0.5 for k, v in body.pairwise_sq_lengths().items()}
        )
        with pytest.raises(ValueError):
            shrunk.check_against(obs)

    def test_values_are_immutable(self):
        body = body_of([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        with pytest.raises(ValueError):
            body.points[0, 0] = 5.0
