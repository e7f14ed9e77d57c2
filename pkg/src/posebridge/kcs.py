"""Part-aware Kinematic Chain Space features."""
import numpy as np

from .skeleton import H36M_16, PART_ORDER
from .validation import check_pose3d


def bone_vectors(pose, skel=H36M_16, normalize=False):
    """Child minus parent for every bone; ``(J-1, 3)`` (or batched)."""
    pose = check_pose3d(pose, n_joints=skel.n_joints, allow_batch=True)
    bones = pose[..., skel.child_index, :] - pose[..., skel.parent_index, :]
    if normalize:
        norms = np.linalg.norm(bones, axis=-1, keepdims=True)
        bones = np.divide(bones, norms, out=np.zeros_like(bones), where=norms > 0)
    return bones


def part_kcs(pose, skel=H36M_16, normalize=False, parts=PART_ORDER):
    """Gram matrix of the bone vectors of each body part.

    Returns a dict mapping part name to a ``(n_i, n_i)`` array (``(..., n_i, n_i)``
    for batched input). Diagonals hold squared bone lengths unless
    ``normalize`` is set, in which case they are 1 for non-zero bones.
    """
    bones = bone_vectors(pose, skel, normalize=normalize)
    out = {}
    for name in parts:
        b = bones[..., list(skel.parts[name]), :]
        out[name] = b @ np.swapaxes(b, -1, -2)
    return out


def part_kcs_features(pose, skel=H36M_16, normalize=False):
    """Upper triangles of all part matrices concatenated into one flat vector per pose."""
    mats = part_kcs(pose, skel, normalize)
    feats = []
    for name in PART_ORDER:
        m = mats[name]
        iu = np.triu_indices(m.shape[-1])
        feats.append(m[..., iu[0], iu[1]])
    return np.concatenate(feats, axis=-1)
