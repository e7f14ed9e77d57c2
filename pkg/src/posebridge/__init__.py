"""Cross-domain 3D human pose alignment: pseudo-labels, human-centric global
transforms, bone augmentation, part-aware KCS, losses and metrics."""
from .geometry import (DEFAULT_CAMERA, CameraIntrinsics, RigidTransform, align_to_target, apply_rigid,
                       backproject, global_transform, human_frame, project)
from .skeleton import H36M_16, Skeleton

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CAMERA", "CameraIntrinsics", "RigidTransform", "Skeleton", "H36M_16",
    "project", "backproject", "human_frame", "global_transform", "align_to_target",
    "apply_rigid",
]
