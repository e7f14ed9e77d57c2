import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posebridge.exceptions import DegenerateFrameError, DegenerateProjectionError
from posebridge.geometry import (CameraIntrinsics, RigidTransform, align_to_target, apply_rigid,
                                 backproject, global_transform, human_frame, project,
                                 random_rotation)
from posebridge.metrics import kabsch, mpjpe
from posebridge.skeleton import H36M_16, Skeleton

from conftest import random_pose, random_rigid

CAM = CameraIntrinsics(1000, 1000, 500, 500)


def _pose_with(joint):
    pose = np.tile([0.0, 0.0, 2.0], (16, 1))
    pose[0] = joint
    return pose


def test_skeleton_tree_and_parts():
    skel = H36M_16
    assert skel.n_joints == 16 and skel.n_bones == 15
    assert len(skel.bones) == 15
    bones = sorted(b for part in skel.parts.values() for b in part)
    assert bones == list(range(15))
    assert len(skel.parts) == 5
    assert (skel.joint_names[skel.right_hip], skel.joint_names[skel.left_hip],
            skel.joint_names[skel.thorax]) == ("r_hip", "l_hip", "thorax")


def test_skeleton_rejects_bad_partition():
    parts = dict(H36M_16.parts)
    parts["torso"] = (6, 7)
    with pytest.raises(ValueError):
        Skeleton(H36M_16.joint_names, H36M_16.parents, parts)


def test_camera_rejects_nonpositive_focal():
    with pytest.raises(ValueError):
        CameraIntrinsics(0, 1000, 0, 0)
    assert CameraIntrinsics.parse("1,2,3,4") == CameraIntrinsics(1, 2, 3, 4)


def test_project_examples():
    assert np.allclose(project(_pose_with([0, 0, 2.0]), CAM)[0], [500, 500])
    assert np.allclose(project(_pose_with([0.5, 0.25, 2.0]), CAM)[0], [750, 625])


def test_project_zero_depth_names_joint():
    pose = _pose_with([0, 0, 2.0])
    pose[5, 2] = 0.0
    with pytest.raises(DegenerateProjectionError, match="joint 5"):
        project(pose, CAM)


def test_project_matches_homogeneous_oracle(rng, standing):
    pose = random_pose(rng, standing)
    hom = pose @ CAM.matrix.T
    assert np.allclose(project(pose, CAM), hom[:, :2] / hom[:, 2:], atol=1e-9, rtol=0)


def test_backproject_examples():
    p2 = np.full((16, 2), 500.0)
    out = backproject(p2, np.full(16, 2.0), CAM)
    assert np.allclose(out[0], [0, 0, 2.0])
    with pytest.raises(DegenerateProjectionError):
        backproject(p2, np.zeros(16), CAM)


def test_backproject_project_round_trip(rng, pose_bank, cam):
    p2 = project(pose_bank, cam)
    back = backproject(p2, pose_bank[..., 2], cam)
    assert np.max(np.abs(back - pose_bank)) < 1e-9
    assert np.max(np.abs(project(back, cam) - p2)) < 1e-9


def test_apply_rigid_identity_and_group_law(rng, standing):
    pose = random_pose(rng, standing)
    assert np.array_equal(apply_rigid(pose, RigidTransform.identity()), pose)
    a, b = random_rigid(rng), random_rigid(rng)
    lhs = apply_rigid(apply_rigid(pose, a), b)
    rhs = apply_rigid(pose, b.compose(a))
    assert np.max(np.abs(lhs - rhs)) < 1e-9
    assert np.max(np.abs(apply_rigid(apply_rigid(pose, a), a.inverse()) - pose)) < 1e-9


def test_apply_rigid_preserves_bone_lengths(rng, standing):
    def lengths(p):
        return np.array([np.sqrt(sum((p[c][k] - p[par][k]) ** 2 for k in range(3)))
                         for par, c in H36M_16.bones])

    pose = random_pose(rng, standing)
    ref = lengths(pose)
    for _ in range(1000):
        moved = apply_rigid(pose, random_rigid(rng))
        assert np.max(np.abs(lengths(moved) - ref)) < 1e-9


def test_rigid_transform_rejects_reflection():
    with pytest.raises(ValueError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_human_frame_axis_aligned_pose():
    pose = np.zeros((16, 3))
    pose[:, 2] = 4.0
    pose[H36M_16.right_hip] = [-0.1, 0.0, 4.0]
    pose[H36M_16.left_hip] = [0.1, 0.0, 4.0]
    pose[H36M_16.thorax] = [0.0, 0.5, 4.0]
    pose += [0.3, -0.2, 0.0]
    frame = human_frame(pose)
    assert np.allclose(frame.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(frame.translation, -np.array([0.3, -0.2, 4.0]), atol=1e-12)


def test_human_frame_thorax_positive_y(rng, pose_bank):
    for pose in pose_bank[:100]:
        frame = human_frame(pose)
        local = frame.apply(pose)
        assert local[H36M_16.thorax, 1] > 0
        assert abs(local[H36M_16.thorax, 2]) < 1e-9
        assert abs(np.linalg.det(frame.rotation) - 1) < 1e-9
        assert np.allclose(local[H36M_16.left_hip, 1:], 0, atol=1e-9)
        assert local[H36M_16.left_hip, 0] > 0


def test_human_frame_equivariance(rng, pose_bank):
    for pose in pose_bank[:200]:
        t = random_rigid(rng)
        lhs = human_frame(apply_rigid(pose, t)).compose(t)
        rhs = human_frame(pose)
        assert np.max(np.abs(lhs.rotation - rhs.rotation)) < 1e-9
        assert np.max(np.abs(lhs.translation - rhs.translation)) < 1e-9


def test_human_frame_degenerate(standing):
    pose = standing + [0, 0, 4]
    bad = pose.copy()
    bad[H36M_16.left_hip] = bad[H36M_16.right_hip]
    with pytest.raises(DegenerateFrameError):
        human_frame(bad)
    bad = pose.copy()
    bad[H36M_16.thorax] = 0.5 * (bad[H36M_16.left_hip] + bad[H36M_16.right_hip]) + [0.4, 0, 0]
    with pytest.raises(DegenerateFrameError):
        human_frame(bad)


def _global_transform_oracle(source, r1, r2, target_root):
    # dense 4x4 homogeneous chain: translate(target) . R2^-1 . R1 . translate(-root)
    def trans(v):
        m = np.eye(4)
        m[:3, 3] = v
        return m

    def rot(r):
        m = np.eye(4)
        m[:3, :3] = r
        return m

    chain = trans(target_root) @ rot(np.linalg.inv(r2)) @ rot(r1) @ trans(-source[0])
    hom = np.hstack([source, np.ones((len(source), 1))])
    return (chain @ hom.T).T[:, :3]


def test_global_transform_identity_cases(rng, standing):
    src = random_pose(rng, standing)
    eye = np.eye(3)
    assert np.allclose(global_transform(src, eye, eye, src[0]), src, atol=1e-15)
    r = random_rotation(rng)
    t = np.array([1.0, -2.0, 7.0])
    assert np.allclose(global_transform(src, r, r, t), src - src[0] + t, atol=1e-12)


def test_global_transform_matches_dense_oracle(rng, pose_bank):
    for src in pose_bank[:200]:
        r1, r2 = random_rotation(rng), random_rotation(rng)
        root = rng.uniform(-3, 3, size=3)
        out = global_transform(src, r1, r2, root)
        assert np.array_equal(out[0], root)
        assert np.max(np.abs(out - _global_transform_oracle(src, r1, r2, root))) < 1e-9


def test_global_transform_isometry(rng, pose_bank):
    src = pose_bank[0]
    out = global_transform(src, random_rotation(rng), random_rotation(rng), [0, 0, 5])
    d_in = np.linalg.norm(src[:, None] - src[None], axis=-1)
    d_out = np.linalg.norm(out[:, None] - out[None], axis=-1)
    assert np.max(np.abs(d_in - d_out)) < 1e-9


def test_align_to_target_exact_under_rigid_gap(rng, pose_bank):
    for src in pose_bank[:300]:
        tgt = apply_rigid(src, random_rigid(rng))
        out = align_to_target(src, tgt)
        assert mpjpe(out, tgt) < 1e-9 * 1000


def test_align_to_target_self_and_idempotent(rng, pose_bank):
    a, b = pose_bank[3], pose_bank[4]
    assert np.allclose(align_to_target(a, a), a, atol=1e-12)
    once = align_to_target(a, b)
    twice = align_to_target(once, b)
    assert np.max(np.abs(once - twice)) < 1e-9
    fa, fb = human_frame(once), human_frame(b)
    assert np.max(np.abs(fa.rotation - fb.rotation)) < 1e-9
    assert np.array_equal(once[0], b[0])


def test_align_to_target_never_beats_kabsch_in_rms(pose_bank):
    # Kabsch minimises the squared error, so its RMS residual is a lower bound
    def rms(x, y):
        return np.sqrt(np.mean(np.sum((x - y) ** 2, axis=-1)))

    for a, b in zip(pose_bank[:250], pose_bank[250:]):
        t, _ = kabsch(a, b)
        assert rms(t.apply(a), b) <= rms(align_to_target(a, b), b) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_human_frame_rotation_is_proper(seed):
    rng = np.random.default_rng(seed)
    pose = rng.normal(size=(16, 3)) + [0, 0, 5]
    try:
        frame = human_frame(pose)
    except DegenerateFrameError:
        return
    r = frame.rotation
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-9)
    assert abs(np.linalg.det(r) - 1) < 1e-9
