import numpy as np
import pytest

from ldpc import construct_code, preset_code
from mesh_library import ACCEPTANCE_MESHES, build_sample, cube, geodesic_sphere, sphere_with_features, tetrahedron, torus
from watermark_config import WatermarkConfig


@pytest.fixture
def tetra():
    return tetrahedron()


@pytest.fixture
def box():
    return cube()


@pytest.fixture(scope="session")
def sphere():
    return geodesic_sphere(6)


@pytest.fixture(scope="session")
def small_torus():
    return torus(24, 16)


@pytest.fixture(scope="session")
def featured_sphere():
    """1442 vertices with 45 isolated spikes and pits standing far above the rest"""
    return sphere_with_features(frequency=12, features=45, height=0.08, seed=0)


@pytest.fixture(scope="session", params=ACCEPTANCE_MESHES)
def full_mesh(request):
    """The roughly 30k-vertex sample meshes; only slow tests use them"""
    return build_sample(request.param)


@pytest.fixture(scope="session")
def toy_code():
    return preset_code("toy")


@pytest.fixture(scope="session")
def small_code():
    """n = 221 with design rate 1 - 3/13"""
    return construct_code(17, 3, 13, search_seed=0)


@pytest.fixture
def default_config():
    return WatermarkConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
