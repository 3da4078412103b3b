import numpy as np
import pytest

from rummage.geometry import Box, Cylinder, Pose, Sphere, mug_shape


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mug():
    return mug_shape()


PRIMITIVES = [
    Sphere(0.05),
    Box((0.1, 0.07, 0.04)),
    Cylinder(0.06, 0.05),
]


def random_pose(rng, planar=False, trans_scale=0.3):
    t = rng.uniform(-trans_scale, trans_scale, 3)
    if planar:
        t[2] = 0.0
        return Pose.from_placement(t, rng.uniform(-np.pi, np.pi))
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    from rummage.geometry import rotation_about_axis

    R = rotation_about_axis(axis, rng.uniform(-np.pi, np.pi))
    return Pose(R, t)
