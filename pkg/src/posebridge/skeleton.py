"""The 16-joint human skeleton used throughout the package.

Joint order follows the common 16-keypoint Human3.6M layout::

     0 hip (root)     4 l_hip      8 thorax       12 l_wrist
     1 r_hip          5 l_knee     9 head         13 r_shoulder
     2 r_knee         6 l_foot    10 l_shoulder   14 r_elbow
     3 r_foot         7 spine     11 l_elbow      15 r_wrist

Bone ``l`` connects ``parents[l + 1]`` to joint ``l + 1``, so there are
exactly 15 bones and they are ordered by child index.
"""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Skeleton:
    joint_names: tuple
    parents: tuple
    parts: dict = field(hash=False)
    right_hip: int = 1
    left_hip: int = 4
    thorax: int = 8

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parents) != n:
            raise ValueError("parents must have one entry per joint")
        if self.parents[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        for j in range(1, n):
            # parents precede children, which makes the graph a tree rooted at 0
            if not 0 <= self.parents[j] < j:
                raise ValueError(f"joint {j} has invalid parent {self.parents[j]}")
        covered = sorted(b for bones in self.parts.values() for b in bones)
        if covered != list(range(n - 1)):
            raise ValueError("parts must partition the bones exactly")
        special = (self.right_hip, self.left_hip, self.thorax)
        if len(set(special)) != 3 or not all(0 <= j < n for j in special):
            raise ValueError("right_hip, left_hip and thorax must be distinct valid joints")

    @property
    def n_joints(self):
        return len(self.joint_names)

    @property
    def n_bones(self):
        return len(self.joint_names) - 1

    @property
    def bones(self):
        """(parent, child) pairs, one per bone."""
        return tuple((self.parents[c], c) for c in range(1, self.n_joints))

    @property
    def parent_index(self):
        return np.array([p for p, _ in self.bones])

    @property
    def child_index(self):
        return np.arange(1, self.n_joints)

    def index(self, name):
        return self.joint_names.index(name)


H36M_JOINTS = (
    "hip", "r_hip", "r_knee", "r_foot", "l_hip", "l_knee", "l_foot", "spine",
    "thorax", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist",
)
H36M_PARENTS = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 8, 10, 11, 8, 13, 14)
# bone indices (child - 1)
H36M_PARTS = {
    "torso": (6, 7, 8),
    "left_arm": (9, 10, 11),
    "right_arm": (12, 13, 14),
    "left_leg": (3, 4, 5),
    "right_leg": (0, 1, 2),
}
PART_ORDER = ("torso", "left_arm", "right_arm", "left_leg", "right_leg")

H36M_16 = Skeleton(H36M_JOINTS, H36M_PARENTS, H36M_PARTS, right_hip=1, left_hip=4, thorax=8)
