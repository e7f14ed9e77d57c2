"""Bone-angle and bone-length augmentation of 3D pose sequences.

Each bone is rotated about its own axis by an angle that grows linearly
with the frame index, then rescaled, and the sequence is rebuilt by
forward kinematics from the unchanged root trajectory.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeMismatchError
from .skeleton import H36M_16
from .validation import check_pose3d, check_unit_vector

DEFAULT_ANGLE_RANGE = (-math.pi / 9, math.pi / 9)
DEFAULT_RATIO_RANGE = (-0.15, 0.15)


@dataclass(frozen=True, eq=False)
class AugmentParams:
    axes: np.ndarray
    angles: np.ndarray
    length_ratios: np.ndarray

    def __post_init__(self):
        axes = np.array(self.axes, dtype=np.float64)
        angles = np.array(self.angles, dtype=np.float64).reshape(-1)
        ratios = np.array(self.length_ratios, dtype=np.float64).reshape(-1)
        if axes.ndim != 2 or axes.shape[1] != 3:
            raise ShapeMismatchError(f"axes must be (L, 3), got {axes.shape}")
        if not (len(axes) == len(angles) == len(ratios)):
            raise ShapeMismatchError("axes, angles and length_ratios must have one entry per bone")
        check_unit_vector(axes, name="axes")
        if not np.all(1.0 + ratios > 0):
            raise ValueError("length ratios must satisfy 1 + ratio > 0")
        for arr in (axes, angles, ratios):
            arr.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "length_ratios", ratios)

    @classmethod
    def identity(cls, n_bones=15):
        axes = np.tile([0.0, 0.0, 1.0], (n_bones, 1))
        return cls(axes, np.zeros(n_bones), np.zeros(n_bones))

    def to_dict(self):
        return {
            "axes": self.axes.tolist(),
            "angles": self.angles.tolist(),
            "length_ratios": self.length_ratios.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["axes"], d["angles"], d["length_ratios"])


@dataclass(frozen=True)
class AugmentConfig:
    angle_range: tuple = DEFAULT_ANGLE_RANGE
    ratio_range: tuple = DEFAULT_RATIO_RANGE
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.angle_range
        if lo > hi:
            raise ValueError("angle_range must be (low, high) with low <= high")
        lo, hi = self.ratio_range
        if lo > hi:
            raise ValueError("ratio_range must be (low, high) with low <= high")
        if lo <= -1.0:
            raise ValueError("ratio_range lower bound must exceed -1")


def poses_to_bones(seq, skel=H36M_16):
    """Split an ``(N, J, 3)`` sequence into bone vectors ``(N, J-1, 3)`` and roots ``(N, 3)``."""
    seq = check_pose3d(seq, n_joints=skel.n_joints, name="sequence", allow_batch=True)
    if seq.ndim == 2:
        seq = seq[None]
    bones = seq[:, skel.child_index] - seq[:, skel.parent_index]
    return bones, seq[:, 0].copy()


def bones_to_poses(bones, roots, skel=H36M_16):
    """Forward kinematics: accumulate bone vectors down the tree from each root."""
    bones = np.asarray(bones, dtype=np.float64)
    roots = np.asarray(roots, dtype=np.float64)
    if bones.ndim == 2:
        bones = bones[None]
    if roots.ndim == 1:
        roots = roots[None]
    if bones.ndim != 3 or bones.shape[1:] != (skel.n_bones, 3):
        raise ShapeMismatchError(f"bones must be (N, {skel.n_bones}, 3), got {bones.shape}")
    if roots.shape != (len(bones), 3):
        raise ShapeMismatchError(f"roots must be ({len(bones)}, 3), got {roots.shape}")
    poses = np.empty((len(bones), skel.n_joints, 3))
    poses[:, 0] = roots
    # parents precede children, so one pass in index order suffices
    for child in range(1, skel.n_joints):
        poses[:, child] = poses[:, skel.parents[child]] + bones[:, child - 1]
    return poses


def rodrigues(axis, angle):
    """Rotation matrix for a rotation of ``angle`` radians about the unit ``axis``."""
    axis = check_unit_vector(np.asarray(axis, dtype=np.float64).reshape(3))
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _rodrigues_batch(axes, angles):
    # axes (..., 3), angles (...) -> (..., 3, 3)
    x, y, z = axes[..., 0], axes[..., 1], axes[..., 2]
    zero = np.zeros_like(x)
    k = np.stack([
        np.stack([zero, -z, y], -1),
        np.stack([z, zero, -x], -1),
        np.stack([-y, x, zero], -1),
    ], -2)
    s = np.sin(angles)[..., None, None]
    c = np.cos(angles)[..., None, None]
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def augment_sequence(seq, params, skel=H36M_16):
    """Rotate bone ``l`` of frame ``n`` by ``n * angles[l] / N`` about ``axes[l]``
    and scale it by ``1 + length_ratios[l]``.

    With zero angles and ratios the input is returned unchanged bit-for-bit.
    """
    seq = check_pose3d(seq, n_joints=skel.n_joints, name="sequence", allow_batch=True)
    single = seq.ndim == 2
    if single:
        seq = seq[None]
    if len(params.angles) != skel.n_bones:
        raise ShapeMismatchError(f"params must cover {skel.n_bones} bones")
    if not np.any(params.angles) and not np.any(params.length_ratios):
        out = seq.copy()
        return out[0] if single else out

    bones, roots = poses_to_bones(seq, skel)
    n_frames = len(seq)
    frame_angles = np.arange(n_frames)[:, None] * params.angles[None, :] / n_frames
    rots = _rodrigues_batch(np.broadcast_to(params.axes, bones.shape), frame_angles)
    new_bones = np.einsum("nlij,nlj->nli", rots, bones) * (1.0 + params.length_ratios)[None, :, None]
    out = bones_to_poses(new_bones, roots, skel)
    return out[0] if single else out


def sample_params(config, rng=None, n_bones=15):
    """Draw augmentation parameters: axes uniform on the sphere, angles and ratios uniform."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    axes = rng.normal(size=(n_bones, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(*config.angle_range, size=n_bones)
    ratios = rng.uniform(*config.ratio_range, size=n_bones)
    return AugmentParams(axes, angles, ratios)


def rotation_about_axis(before, after, axis):
    """Signed angle that carries ``before`` to ``after`` about ``axis``.

    Both vectors are projected onto the plane normal to ``axis`` first, which
    is how the per-frame bone rotation is measured.
    """
    axis = np.asarray(axis, dtype=np.float64)
    b = before - np.sum(before * axis, axis=-1, keepdims=True) * axis
    a = after - np.sum(after * axis, axis=-1, keepdims=True) * axis
    return np.arctan2(np.sum(np.cross(b, a) * axis, axis=-1), np.sum(b * a, axis=-1))
