import math
import sys

import numpy as np
import pytest

from posebridge.geometry import DEFAULT_CAMERA, RigidTransform, random_rotation
from posebridge.synthetic import SceneConfig, load_templates, sample_pose, sample_poses


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def templates():
    return load_templates()


@pytest.fixture(scope="session")
def standing(templates):
    return templates["standing"]


@pytest.fixture
def cam():
    return DEFAULT_CAMERA


@pytest.fixture(scope="session")
def pose_bank():
    """500 in-frustum poses with arbitrary yaw, shared across tests."""
    cfg = SceneConfig(count=500, seed=99, yaw_range=(-math.pi, math.pi))
    return sample_poses(cfg)


def random_pose(rng, template, **kw):
    cfg = SceneConfig(yaw_range=(-math.pi, math.pi), **kw)
    return sample_pose(rng, template, cfg)


def random_rigid(rng, scale=3.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, size=3))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
