"""LSGAN adversarial losses and the pose MSE loss, evaluated on score arrays.

No networks are involved: the functions take discriminator outputs and
reduce them with a batch mean.

Note that the generator loss also pulls the *real* scores towards 0, which
differs from textbook LSGAN; it is implemented as the method defines it.
"""
from dataclasses import dataclass

import numpy as np

from .validation import check_same_shape


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 6.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


def _scores(x, name):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError(f"{name} must be a non-empty batch")
    return x


def _lsgan_pair(towards_one, towards_zero):
    return 0.5 * float(np.mean((towards_one - 1.0) ** 2)) + 0.5 * float(np.mean(towards_zero ** 2))


def lsgan_discriminator_loss(real_scores, fake_scores):
    """``½ E[(D(real) - 1)²] + ½ E[D(fake)²]``."""
    return _lsgan_pair(_scores(real_scores, "real_scores"), _scores(fake_scores, "fake_scores"))


def lsgan_generator_adv_loss(fake2d, real2d, fake3d, real3d, weights=LossWeights()):
    """Weighted sum of the 2D and 3D generator terms, each ``½ E[(D(fake)-1)²] + ½ E[D(real)²]``."""
    term2d = _lsgan_pair(_scores(fake2d, "fake2d"), _scores(real2d, "real2d"))
    term3d = _lsgan_pair(_scores(fake3d, "fake3d"), _scores(real3d, "real3d"))
    return weights.alpha * term2d + weights.beta * term3d


def total_discriminator_loss(real2d, fake2d, real3d, fake3d):
    return lsgan_discriminator_loss(real2d, fake2d) + lsgan_discriminator_loss(real3d, fake3d)


def mse_pose_loss(pred, gt):
    pred, gt = check_same_shape(pred, gt)
    return float(np.mean((pred - gt) ** 2))
