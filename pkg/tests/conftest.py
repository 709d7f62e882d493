import numpy as np
import pytest

from gsclosure.splat_io import SceneSplat
from gsclosure.synthetic import SurfaceSpec, Sphere, gen_primitive_surface


T_DIAG = np.full(3, 1. / np.sqrt(3.))


def make_scene(means, log_scales=None, rotations=None, opacity_logits=None,
               color_rest=None):
    """A splat scene in the exporter layout with sensible defaults."""
    means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
    n = len(means)
    if log_scales is None:
        log_scales = np.log(np.tile([1., 1., 1e-2], (n, 1)))
    if rotations is None:
        rotations = np.tile([1., 0., 0., 0.], (n, 1))
    if opacity_logits is None:
        opacity_logits = np.zeros(n)
    return SceneSplat.from_arrays(means, log_scales, rotations,
                                  opacity_logits, color_rest=color_rest)


def rotation_about(axis, angle):
    """Unit quaternion `(w, x, y, z)` of a rotation by `angle`."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.r_[np.cos(angle / 2), np.sin(angle / 2) * axis]


@pytest.fixture
def random_state():
    return np.random.RandomState(0x5EED)


@pytest.fixture(scope="session")
def unit_sphere():
    """A unit sphere of 10 000 outward elements, with its tight box."""
    elements, _, box = gen_primitive_surface(SurfaceSpec(Sphere(1.), 10000))
    return elements, box
