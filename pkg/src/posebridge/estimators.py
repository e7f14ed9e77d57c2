"""scikit-learn compatible wrappers around the functional core.

Pose batches may be passed either shaped ``(N, J, D)`` or flattened to
``(N, J * D)``; outputs follow the layout of the input.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .augmentor import AugmentConfig, AugmentParams, augment_sequence, sample_params
from .exceptions import PoseBridgeError, ShapeMismatchError
from .geometry import DEFAULT_CAMERA
from .kcs import part_kcs_features
from .metrics import mpjpe
from .pseudo_label import DEFAULT_INIT_DEPTH, generate_pseudo_label, mean_bone_lengths
from .skeleton import H36M_16
from .synthetic import METHODS, align_pair


def check_pose_batch(X, dim, n_joints=16, name="X"):
    """Return ``(poses, was_flat)`` with poses shaped ``(N, n_joints, dim)``."""
    X = np.asarray(X, dtype=np.float64)
    flat = X.ndim == 2 and X.shape[1] == n_joints * dim
    if flat:
        X = X.reshape(len(X), n_joints, dim)
    if X.ndim != 3 or X.shape[1:] != (n_joints, dim):
        raise ShapeMismatchError(
            f"{name} must be (N, {n_joints}, {dim}) or (N, {n_joints * dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X, flat


def _restore(poses, flat):
    return poses.reshape(len(poses), -1) if flat else poses


def stack_keypoints(pose2d, rel_pose3d):
    """Join 2D keypoints and root-relative 3D poses into the ``(N, J, 5)`` layout
    consumed by :class:`PseudoLabeler`."""
    return np.concatenate([np.asarray(pose2d, dtype=np.float64),
                           np.asarray(rel_pose3d, dtype=np.float64)], axis=-1)


class PseudoLabeler(TransformerMixin, BaseEstimator):
    """Lift ``(u, v, X_rel, Y_rel, Z_rel)`` rows to absolute camera-frame poses.

    ``fit`` averages the bone lengths of the relative poses; ``transform``
    runs the two-stage depth recovery per pose. Poses whose solve fails are
    returned as NaN and listed in ``failed_``.
    """

    def __init__(self, camera=DEFAULT_CAMERA, init_depth=DEFAULT_INIT_DEPTH, skeleton=H36M_16):
        self.camera = camera
        self.init_depth = init_depth
        self.skeleton = skeleton

    def fit(self, X, y=None):
        X, _ = check_pose_batch(X, 5, self.skeleton.n_joints)
        self.bone_profile_ = mean_bone_lengths(X[..., 2:], self.skeleton)
        return self

    def transform(self, X):
        check_is_fitted(self, "bone_profile_")
        X, flat = check_pose_batch(X, 5, self.skeleton.n_joints)
        out = np.full((len(X), self.skeleton.n_joints, 3), np.nan)
        self.failed_ = []
        self.results_ = []
        for i, row in enumerate(X):
            try:
                res = generate_pseudo_label(row[:, :2], row[:, 2:], self.camera, self.bone_profile_,
                                            self.init_depth, self.skeleton)
            except PoseBridgeError:
                self.failed_.append(i)
                self.results_.append(None)
                continue
            out[i] = res.absolute_pose
            self.results_.append(res)
        return _restore(out, flat)


class GlobalPoseAligner(TransformerMixin, BaseEstimator):
    """Rigidly move source poses onto target poses remembered at ``fit`` time.

    ``method`` is ``"human_centric"`` (hip/thorax frame bridge), ``"kabsch"``
    or ``"none"``. Source ``i`` is paired with target ``i mod n_targets``,
    or with a random target when ``pairing="random"``.
    """

    def __init__(self, method="human_centric", pairing="index", random_state=None, skeleton=H36M_16):
        self.method = method
        self.pairing = pairing
        self.random_state = random_state
        self.skeleton = skeleton

    def fit(self, X, y=None):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.pairing not in ("index", "random"):
            raise ValueError("pairing must be 'index' or 'random'")
        X, _ = check_pose_batch(X, 3, self.skeleton.n_joints)
        if len(X) == 0:
            raise ValueError("need at least one target pose")
        self.targets_ = X.copy()
        return self

    def _pairing(self, n):
        if self.pairing == "random":
            return np.random.default_rng(self.random_state).integers(len(self.targets_), size=n)
        return np.arange(n) % len(self.targets_)

    def transform(self, X):
        check_is_fitted(self, "targets_")
        X, flat = check_pose_batch(X, 3, self.skeleton.n_joints)
        self.pairs_ = self._pairing(len(X))
        out = np.stack([align_pair(x, self.targets_[j], self.method, self.skeleton)
                        for x, j in zip(X, self.pairs_)]) if len(X) else X.copy()
        return _restore(out, flat)

    def score(self, X, y=None):
        """Negative mean MPJPE (mm) between aligned sources and their targets."""
        aligned, _ = check_pose_batch(self.transform(X), 3, self.skeleton.n_joints)
        return -mpjpe(aligned, self.targets_[self.pairs_])


class PoseAugmentor(TransformerMixin, BaseEstimator):
    """Bone-angle/length augmentation of one pose sequence ``(N, J, 3)``.

    Parameters are drawn at ``fit`` unless ``params`` is given explicitly.
    """

    def __init__(self, angle_range=AugmentConfig.angle_range, ratio_range=AugmentConfig.ratio_range,
                 params=None, random_state=None, skeleton=H36M_16):
        self.angle_range = angle_range
        self.ratio_range = ratio_range
        self.params = params
        self.random_state = random_state
        self.skeleton = skeleton

    def fit(self, X=None, y=None):
        if self.params is not None:
            params = self.params
            if not isinstance(params, AugmentParams):
                params = AugmentParams.from_dict(params)
        else:
            config = AugmentConfig(tuple(self.angle_range), tuple(self.ratio_range))
            rng = self.random_state
            if not isinstance(rng, np.random.Generator):
                rng = np.random.default_rng(rng)
            params = sample_params(config, rng, self.skeleton.n_bones)
        self.params_ = params
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X, flat = check_pose_batch(X, 3, self.skeleton.n_joints)
        return _restore(augment_sequence(X, self.params_, self.skeleton), flat)


class PartKCSTransformer(TransformerMixin, BaseEstimator):
    """Flattened upper triangles of the five per-part KCS Gram matrices."""

    def __init__(self, normalize=False, skeleton=H36M_16):
        self.normalize = normalize
        self.skeleton = skeleton

    def fit(self, X, y=None):
        X, _ = check_pose_batch(X, 3, self.skeleton.n_joints)
        self.n_features_out_ = part_kcs_features(X[:1], self.skeleton, self.normalize).shape[-1] \
            if len(X) else None
        return self

    def transform(self, X):
        X, _ = check_pose_batch(X, 3, self.skeleton.n_joints)
        return part_kcs_features(X, self.skeleton, self.normalize)
