"""Input validation helpers shared by the functional core and the estimators."""
import numpy as np

from .exceptions import ShapeMismatchError


def check_points(x, dim, n_joints=None, name="pose", allow_batch=False):
    """Return ``x`` as a float64 array of shape ``(..., J, dim)``.

    Raises
    ------
    ShapeMismatchError
        If the trailing dimensions do not match, or a batch is given where a
        single pose is expected.
    ValueError
        If any coordinate is not finite.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != dim:
        raise ShapeMismatchError(f"{name} must have shape (J, {dim}), got {arr.shape}")
    if not allow_batch and arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be a single (J, {dim}) array, got {arr.shape}")
    if n_joints is not None and arr.shape[-2] != n_joints:
        raise ShapeMismatchError(f"{name} must have {n_joints} joints, got {arr.shape[-2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr


def check_pose3d(x, n_joints=None, name="pose", allow_batch=False):
    return check_points(x, 3, n_joints, name, allow_batch)


def check_pose2d(x, n_joints=None, name="pose2d", allow_batch=False):
    return check_points(x, 2, n_joints, name, allow_batch)


def check_same_shape(a, b, names=("pred", "gt")):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")
    return a, b


def check_rotation(r, atol=1e-9, name="rotation"):
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        raise ShapeMismatchError(f"{name} must be 3x3, got {r.shape}")
    if not np.allclose(r @ r.T, np.eye(3), atol=atol, rtol=0.0):
        raise ValueError(f"{name} is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > atol:
        raise ValueError(f"{name} is not a proper rotation (det != +1)")
    return r


def check_unit_vector(v, atol=1e-9, name="axis"):
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise ShapeMismatchError(f"{name} must be a 3-vector")
    norms = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norms - 1.0) > atol):
        raise ValueError(f"{name} must have unit norm (got {norms})")
    return v
