import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from plkcalib import sim
from plkcalib.geometry import ExtrinsicPose, LineSegment2D, plucker_from_endpoints
from plkcalib.method1 import Correspondence

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_rotation(rng):
    return Rotation.random(random_state=rng).as_matrix()


def random_pose(rng, trans_scale=1.0):
    return ExtrinsicPose(random_rotation(rng), rng.normal(0, trans_scale, 3))


def random_camera_segment(rng, depth=(2.0, 10.0)):
    """Two camera-frame points in front of the camera, roughly in view."""
    pts = []
    for _ in range(2):
        z = rng.uniform(*depth)
        pts.append(np.array([rng.uniform(-0.5, 0.5) * z, rng.uniform(-0.4, 0.4) * z, z]))
    return pts


def random_correspondence(rng, pose, intr, pixel_noise=3.0):
    """Correspondence whose 3D line is consistent with ``pose`` up to pixel noise."""
    while True:
        pc1, pc2 = random_camera_segment(rng)
        if np.linalg.norm(pc1 - pc2) > 0.5:
            break
    inv = pose.inverse()
    line = plucker_from_endpoints(inv.transform_point(pc1), inv.transform_point(pc2))
    x1 = intr.project_point(pc1) + rng.normal(0, pixel_noise, 2)
    x2 = intr.project_point(pc2) + rng.normal(0, pixel_noise, 2)
    return Correspondence(line, LineSegment2D(x1, x2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def intr():
    return sim.DEFAULT_INTRINSICS


@pytest.fixture
def gt_pose():
    return sim.DEFAULT_GT_POSE


@pytest.fixture
def scene_a():
    return sim.generate_scene(sim.Scenario("a"), 11)


@pytest.fixture
def scene_b():
    return sim.generate_scene(sim.Scenario("b"), 11)


@pytest.fixture
def scene_c():
    return sim.generate_scene(sim.Scenario("c"), 11)


def noiseless(scene):
    cfg = sim.SceneConfig()
    return sim.observe(scene, cfg.gt_pose, cfg.intrinsics, 0.0, None)
