"""Pose error metrics and the Kabsch rigid alignment.

All pose inputs are in metres; every reported distance is in millimetres.
Metrics accept a single ``(J, 3)`` pose or a batch ``(N, J, 3)``.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DegenerateInputError
from .geometry import RigidTransform
from .validation import check_pose3d, check_same_shape

PCK_THRESHOLD_MM = 150.0
AUC_THRESHOLDS_MM = tuple(float(t) for t in range(5, 151, 5))


def _pair(pred, gt):
    pred, gt = check_same_shape(pred, gt)
    pred = check_pose3d(pred, name="pred", allow_batch=True)
    gt = check_pose3d(gt, name="gt", allow_batch=True)
    return pred, gt


def joint_errors(pred, gt):
    """Euclidean error per joint, in mm."""
    pred, gt = _pair(pred, gt)
    return 1000.0 * np.linalg.norm(pred - gt, axis=-1)


def mpjpe(pred, gt):
    return float(np.mean(joint_errors(pred, gt)))


def _check_spread(x, name):
    s = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    if len(x) < 3 or s[0] < 1e-12 or s[1] <= 1e-9 * s[0]:
        raise DegenerateInputError(f"{name} points are collinear or coincident")


def _umeyama(src, dst, with_scale):
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    a = src - mu_s
    b = dst - mu_d
    u, s, vt = np.linalg.svd(a.T @ b)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0:
        d = 1.0
    corr = np.diag([1.0, 1.0, d])
    rot = vt.T @ corr @ u.T
    scale = 1.0
    if with_scale:
        scale = float(np.sum(s * np.diag(corr)) / np.sum(a * a))
    trans = mu_d - scale * rot @ mu_s
    return rot, trans, scale


def kabsch(p, q):
    """Optimal proper rotation and translation carrying ``p`` onto ``q``.

    Returns
    -------
    transform : RigidTransform
        Minimises ``sum |R p_i + t - q_i|^2``.
    residual : float
        MPJPE in mm between the aligned ``p`` and ``q``.

    Raises
    ------
    DegenerateInputError
        If either set has fewer than 3 points or is collinear.
    """
    p, q = _pair(p, q)
    if p.ndim != 2:
        raise ValueError("kabsch aligns one point set at a time")
    _check_spread(p, "P")
    _check_spread(q, "Q")
    rot, trans, _ = _umeyama(p, q, with_scale=False)
    transform = RigidTransform(rot, trans)
    return transform, mpjpe(transform.apply(p), q)


def procrustes_align(pred, gt):
    """Similarity-align ``pred`` onto ``gt`` (rotation, translation, uniform scale)."""
    _check_spread(pred, "pred")
    _check_spread(gt, "gt")
    rot, trans, scale = _umeyama(pred, gt, with_scale=True)
    return scale * pred @ rot.T + trans


def pa_mpjpe(pred, gt):
    """MPJPE after optimal similarity alignment; averaged over poses for a batch."""
    pred, gt = _pair(pred, gt)
    if pred.ndim == 2:
        return mpjpe(procrustes_align(pred, gt), gt)
    flat_p = pred.reshape(-1, *pred.shape[-2:])
    flat_g = gt.reshape(-1, *gt.shape[-2:])
    return float(np.mean([mpjpe(procrustes_align(a, b), b) for a, b in zip(flat_p, flat_g)]))


def pck(pred, gt, threshold_mm=PCK_THRESHOLD_MM):
    """Percentage of joints whose error is strictly below ``threshold_mm``."""
    return float(100.0 * np.mean(joint_errors(pred, gt) < threshold_mm))


def auc(pred, gt, thresholds_mm=AUC_THRESHOLDS_MM):
    """Mean PCK fraction over ``thresholds_mm``."""
    err = joint_errors(pred, gt).reshape(-1)
    thresholds = np.asarray(thresholds_mm, dtype=np.float64)
    if thresholds.size == 0:
        raise ValueError("need at least one AUC threshold")
    return float(np.mean(err[None, :] < thresholds[:, None]))


@dataclass
class MetricReport:
    mpjpe: float
    pa_mpjpe: float
    pck: float
    auc: float
    per_joint: list
    threshold_mm: float = PCK_THRESHOLD_MM

    def to_dict(self):
        return asdict(self)


def evaluate(pred, gt, threshold_mm=PCK_THRESHOLD_MM, thresholds_mm=AUC_THRESHOLDS_MM):
    """Compute every metric for one pose pair or a batch of pairs."""
    pred, gt = _pair(pred, gt)
    err = joint_errors(pred, gt)
    per_joint = err.reshape(-1, err.shape[-1]).mean(axis=0)
    return MetricReport(
        mpjpe=float(err.mean()),
        pa_mpjpe=pa_mpjpe(pred, gt),
        pck=pck(pred, gt, threshold_mm),
        auc=auc(pred, gt, thresholds_mm),
        per_joint=per_joint.tolist(),
        threshold_mm=float(threshold_mm),
    )
