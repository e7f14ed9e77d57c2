"""Pinhole projection, rigid transforms and the human-centric frame bridge.

Poses are plain ``(J, 3)`` float arrays in metres in a camera frame
(x right, y down, z forward); 2D poses are ``(J, 2)`` pixel arrays.
"""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import DegenerateFrameError, DegenerateProjectionError
from .skeleton import H36M_16
from .validation import check_pose2d, check_pose3d, check_rotation


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        for name in ("fx", "fy", "cx", "cy"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def parse(cls, text):
        """Build from a ``"fx,fy,cx,cy"`` string."""
        parts = [p for p in str(text).split(",") if p.strip()]
        if len(parts) != 4:
            raise ValueError(f"camera must be 'fx,fy,cx,cy', got {text!r}")
        return cls(*(float(p) for p in parts))

    @classmethod
    def from_dict(cls, d):
        return cls(d["fx"], d["fy"], d["cx"], d["cy"])

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


DEFAULT_CAMERA = CameraIntrinsics(1000.0, 1000.0, 1000.0, 1000.0)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        r = r.copy()
        t = t.copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other):
        """Return ``self ∘ other`` (``other`` is applied first)."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self):
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def as_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


def project(pose, cam):
    """Perspective projection of camera-frame joints to pixels.

    Accepts a single ``(J, 3)`` pose or a batch ``(..., J, 3)``.

    Raises
    ------
    DegenerateProjectionError
        If any joint has ``Z <= 0``.
    """
    pose = check_pose3d(pose, allow_batch=True)
    z = pose[..., 2]
    bad = np.argwhere(~(z > 0))
    if bad.size:
        idx = tuple(bad[0])
        raise DegenerateProjectionError(int(idx[-1]), float(z[idx]))
    u = cam.fx * pose[..., 0] / z + cam.cx
    v = cam.fy * pose[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def backproject(pose2d, depths, cam):
    """Lift pixels to camera-frame points at the given per-joint depths."""
    pose2d = check_pose2d(pose2d, allow_batch=True)
    depths = np.asarray(depths, dtype=np.float64)
    if depths.shape != pose2d.shape[:-1]:
        depths = np.broadcast_to(depths, pose2d.shape[:-1])
    bad = np.argwhere(~(depths > 0))
    if bad.size:
        idx = tuple(bad[0])
        raise DegenerateProjectionError(int(idx[-1]), float(depths[idx]))
    x = (pose2d[..., 0] - cam.cx) / cam.fx * depths
    y = (pose2d[..., 1] - cam.cy) / cam.fy * depths
    return np.stack([x, y, depths], axis=-1)


def apply_rigid(pose, t):
    return t.apply(check_pose3d(pose, allow_batch=True))


def human_frame(pose, skel=H36M_16):
    """Transform from the camera frame into the body-attached frame.

    The origin sits midway between the hips, x points from the right hip to
    the left hip, z is normal to the hip/thorax plane and y = z × x, so the
    thorax always has a positive y coordinate in the returned frame.

    Raises
    ------
    DegenerateFrameError
        If the hips coincide or the thorax is collinear with them.
    """
    pose = check_pose3d(pose, n_joints=skel.n_joints)
    r_hip = pose[skel.right_hip]
    l_hip = pose[skel.left_hip]
    origin = 0.5 * (r_hip + l_hip)

    across = l_hip - r_hip
    width = np.linalg.norm(across)
    if width < 1e-12:
        raise DegenerateFrameError("left and right hip coincide")
    x_axis = across / width

    up = pose[skel.thorax] - origin
    normal = np.cross(x_axis, up)
    up_norm = np.linalg.norm(up)
    normal_norm = np.linalg.norm(normal)
    if up_norm < 1e-12 or normal_norm < 1e-9 * up_norm:
        raise DegenerateFrameError("thorax is collinear with the hips")
    z_axis = normal / normal_norm
    y_axis = np.cross(z_axis, x_axis)

    rotation = np.stack([x_axis, y_axis, z_axis])
    return RigidTransform(rotation, -rotation @ origin)


def global_transform(source, r1, r2, target_root):
    """Rotate a root-centred pose from the source camera into the target camera.

    ``r1`` and ``r2`` map the source and target camera frames onto the
    human-centric frame; the result is ``r2⁻¹ r1 (source - source[0]) + target_root``.
    """
    source = check_pose3d(source)
    r1 = check_rotation(r1, name="r1")
    r2 = check_rotation(r2, name="r2")
    target_root = np.asarray(target_root, dtype=np.float64).reshape(3)
    rot = r2.T @ r1
    return (source - source[0]) @ rot.T + target_root


def align_to_target(source, target, skel=H36M_16):
    """Move ``source`` so its body frame and root match those of ``target``."""
    source = check_pose3d(source, n_joints=skel.n_joints, name="source")
    target = check_pose3d(target, n_joints=skel.n_joints, name="target")
    r1 = human_frame(source, skel).rotation
    r2 = human_frame(target, skel).rotation
    return global_transform(source, r1, r2, target[0])


def random_rotation(rng):
    """Uniformly distributed proper rotation matrix."""
    return Rotation.random(random_state=rng).as_matrix()
