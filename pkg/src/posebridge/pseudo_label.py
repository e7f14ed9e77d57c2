"""Absolute 3D pseudo-labels from a 2D pose and a root-relative 3D pose.

Stage 1 fixes a single root depth so that the back-projected skeleton has
the expected bone lengths. Stage 2 then refines the full 3D root position
by minimising the reprojection error of ``rel_pose + root``.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateInputError, InfeasibleDepthError
from .geometry import backproject, project
from .skeleton import H36M_16
from .validation import check_pose2d, check_pose3d

DEFAULT_INIT_DEPTH = 3.0


@dataclass(frozen=True, eq=False)
class BoneLengthProfile:
    lengths: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.float64).reshape(-1).copy()
        if not np.all(lengths > 0):
            raise ValueError("bone lengths must all be positive")
        lengths.flags.writeable = False
        object.__setattr__(self, "lengths", lengths)

    def scaled(self, factor):
        return BoneLengthProfile(self.lengths * factor)

    def to_list(self):
        return self.lengths.tolist()


class Stage1Result(NamedTuple):
    pose: np.ndarray
    residual: float
    iterations: int
    converged: bool
    root_depth: float


class Stage2Result(NamedTuple):
    root: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass(eq=False)
class PseudoLabelResult:
    absolute_pose: np.ndarray
    root: np.ndarray
    stage1_root: np.ndarray
    stage1_pose: np.ndarray
    stage1_residual: float
    stage2_residual: float
    iterations: tuple
    converged: tuple

    def to_dict(self):
        return {
            "pseudo_joints3d": self.absolute_pose.tolist(),
            "root": self.root.tolist(),
            "stage1_root": self.stage1_root.tolist(),
            "stage1_residual": self.stage1_residual,
            "stage2_residual": self.stage2_residual,
            "stage1_iterations": self.iterations[0],
            "stage2_iterations": self.iterations[1],
            "stage1_converged": self.converged[0],
            "stage2_converged": self.converged[1],
        }


def bone_lengths(pose, skel=H36M_16):
    pose = np.asarray(pose, dtype=np.float64)
    return np.linalg.norm(pose[..., skel.child_index, :] - pose[..., skel.parent_index, :], axis=-1)


def mean_bone_lengths(poses, skel=H36M_16):
    """Per-bone arithmetic mean of Euclidean bone lengths over a pose collection."""
    poses = np.asarray(list(poses) if not isinstance(poses, np.ndarray) else poses, dtype=np.float64)
    if poses.size == 0:
        raise ValueError("cannot average bone lengths over an empty collection")
    poses = check_pose3d(poses, n_joints=skel.n_joints, allow_batch=True)
    if poses.ndim == 2:
        poses = poses[None]
    return BoneLengthProfile(bone_lengths(poses, skel).mean(axis=0))


def _rays(pose2d, cam):
    rays = np.ones((len(pose2d), 3))
    rays[:, 0] = (pose2d[:, 0] - cam.cx) / cam.fx
    rays[:, 1] = (pose2d[:, 1] - cam.cy) / cam.fy
    return rays


def _check_rel_pose(rel_pose, skel):
    rel_pose = check_pose3d(rel_pose, n_joints=skel.n_joints, name="rel_pose")
    if np.linalg.norm(rel_pose[0]) > 1e-9:
        raise ValueError("rel_pose must be root-relative (joint 0 at the origin)")
    return rel_pose


def stage1_depth_fit(pose2d, rel_pose, cam, profile, init_depth=DEFAULT_INIT_DEPTH,
                     skel=H36M_16, max_iter=100, tol=1e-8):
    """Fit the root depth so back-projected bones match ``profile``.

    Joint ``j`` is reconstructed at depth ``Z0 + rel_pose[j, 2]`` along its
    pixel ray. ``Z0`` is found by damped Gauss-Newton (step halving until the
    bone-length objective decreases with all depths positive).

    Returns
    -------
    Stage1Result
        ``(pose, residual, iterations, converged, root_depth)``; ``residual``
        is the sum of squared bone-length errors in m².

    Raises
    ------
    InfeasibleDepthError
        If the start or the solution puts a joint at non-positive depth.
    DegenerateInputError
        If the objective does not depend on the root depth at all.
    """
    pose2d = check_pose2d(pose2d, n_joints=skel.n_joints)
    rel_pose = _check_rel_pose(rel_pose, skel)
    lengths = profile.lengths
    if lengths.shape != (skel.n_bones,):
        raise ValueError(f"profile must hold {skel.n_bones} lengths")
    if not init_depth > 0:
        raise InfeasibleDepthError(f"initial depth must be positive, got {init_depth}")

    rays = _rays(pose2d, cam)
    dz = rel_pose[:, 2]
    pi, ci = skel.parent_index, skel.child_index
    slope = rays[ci] - rays[pi]
    offset = dz[ci, None] * rays[ci] - dz[pi, None] * rays[pi]

    def evaluate(z0):
        bones = z0 * slope + offset
        norms = np.linalg.norm(bones, axis=1)
        err = norms - lengths
        return bones, norms, err, float(err @ err)

    z0 = float(init_depth)
    if np.min(z0 + dz) <= 0:
        raise InfeasibleDepthError(f"initial depth {z0} puts a joint behind the camera")

    bones, norms, err, cost = evaluate(z0)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        safe = np.where(norms > 0, norms, 1.0)
        jac = np.where(norms > 0, np.einsum("ij,ij->i", bones, slope) / safe, 0.0)
        hess = float(jac @ jac)
        if hess == 0.0:
            if cost == 0.0:
                converged = True
                break
            raise DegenerateInputError("bone lengths do not depend on the root depth")
        delta = -float(jac @ err) / hess

        step = 1.0
        accepted = False
        while abs(step * delta) >= tol * 1e-3:
            cand = z0 + step * delta
            if np.min(cand + dz) > 0:
                c_bones, c_norms, c_err, c_cost = evaluate(cand)
                if c_cost <= cost:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            # no feasible descent left; the current point is stationary
            converged = True
            break
        moved = abs(cand - z0)
        z0, bones, norms, err, cost = cand, c_bones, c_norms, c_err, c_cost
        if moved < tol:
            converged = True
            break

    if np.min(z0 + dz) <= 1e-6:
        raise InfeasibleDepthError(f"root depth {z0} collapses a joint onto the camera plane")
    pose = backproject(pose2d, z0 + dz, cam)
    return Stage1Result(pose, cost, it, converged, z0)


def _reprojection(rel_pose, pose2d, cam, root):
    pts = rel_pose + root
    z = pts[:, 2]
    if np.any(z <= 0):
        return None, None
    res = np.empty((len(pts), 2))
    res[:, 0] = cam.fx * pts[:, 0] / z + cam.cx - pose2d[:, 0]
    res[:, 1] = cam.fy * pts[:, 1] / z + cam.cy - pose2d[:, 1]
    return pts, res.reshape(-1)


def _jacobian(pts, cam):
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    jac = np.zeros((len(pts), 2, 3))
    jac[:, 0, 0] = cam.fx / z
    jac[:, 0, 2] = -cam.fx * x / z**2
    jac[:, 1, 1] = cam.fy / z
    jac[:, 1, 2] = -cam.fy * y / z**2
    return jac.reshape(-1, 3)


def stage2_root_refine(rel_pose, pose2d, cam, root_init, skel=H36M_16,
                       max_iter=200, gtol=1e-10, xtol=1e-10, max_rejections=60):
    """Refine the absolute root position by Levenberg-Marquardt on reprojection error.

    The objective is ``sum_j |project(rel_pose[j] + root) - pose2d[j]|^2`` in px².
    Steps that would put any joint at non-positive depth are rejected and
    the damping is increased.

    Raises
    ------
    InfeasibleDepthError
        If ``root_init`` is infeasible, or ``max_rejections`` consecutive
        steps are rejected for infeasibility.
    """
    rel_pose = _check_rel_pose(rel_pose, skel)
    pose2d = check_pose2d(pose2d, n_joints=skel.n_joints)
    root = np.asarray(root_init, dtype=np.float64).reshape(3).copy()

    pts, res = _reprojection(rel_pose, pose2d, cam, root)
    if pts is None:
        raise InfeasibleDepthError("initial root puts a joint at non-positive depth")
    cost = float(res @ res)

    mu = None
    converged = False
    infeasible_streak = 0
    it = 0
    while it < max_iter:
        jac = _jacobian(pts, cam)
        grad = jac.T @ res
        if np.linalg.norm(grad) < gtol:
            converged = True
            break
        it += 1
        jtj = jac.T @ jac
        if mu is None:
            mu = 1e-3 * float(np.max(np.diag(jtj)))
        delta = np.linalg.solve(jtj + mu * np.eye(3), -grad)
        cand = root + delta
        c_pts, c_res = _reprojection(rel_pose, pose2d, cam, cand)
        if c_pts is None:
            infeasible_streak += 1
            if infeasible_streak >= max_rejections:
                raise InfeasibleDepthError("refinement keeps proposing roots behind the camera")
            mu *= 10.0
            continue
        infeasible_streak = 0
        c_cost = float(c_res @ c_res)
        if c_cost <= cost:
            root, pts, res, cost = cand, c_pts, c_res, c_cost
            mu = max(mu / 10.0, 1e-12)
            if np.linalg.norm(delta) < xtol:
                converged = True
                break
        else:
            mu *= 10.0
            if np.linalg.norm(delta) < xtol:
                converged = True
                break
    return Stage2Result(root, cost, it, converged)


def generate_pseudo_label(pose2d, rel_pose, cam, profile, init_depth=DEFAULT_INIT_DEPTH,
                          skel=H36M_16):
    """Run both stages and return the absolute pseudo-label.

    Raises
    ------
    DegenerateInputError
        If every bone of ``rel_pose`` has zero length.
    """
    rel_pose = _check_rel_pose(rel_pose, skel)
    if np.all(bone_lengths(rel_pose, skel) < 1e-12):
        raise DegenerateInputError("rel_pose has no non-zero bones to constrain the depth")
    s1 = stage1_depth_fit(pose2d, rel_pose, cam, profile, init_depth, skel)
    stage1_root = s1.pose[0].copy()
    s2 = stage2_root_refine(rel_pose, pose2d, cam, stage1_root, skel)
    absolute = rel_pose + s2.root
    absolute[0] = s2.root
    return PseudoLabelResult(
        absolute_pose=absolute,
        root=s2.root,
        stage1_root=stage1_root,
        stage1_pose=s1.pose,
        stage1_residual=s1.residual,
        stage2_residual=s2.residual,
        iterations=(s1.iterations, s2.iterations),
        converged=(s1.converged, s2.converged),
    )


def reprojection_rms(pose, pose2d, cam):
    return float(np.sqrt(np.mean(np.sum((project(pose, cam) - pose2d) ** 2, axis=-1))))
