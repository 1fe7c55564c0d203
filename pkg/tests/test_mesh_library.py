import numpy as np
import pytest

from mesh_library import (build_sample, geodesic_sphere, grid, spike_apex, spike_grid, sphere_with_features,
                          terrain, torus)
from vertex_stability import stability_rank


@pytest.mark.parametrize("frequency", [1, 2, 5])
def test_geodesic_sphere_counts(frequency):
    sphere = geodesic_sphere(frequency, radius=2.0)
    assert sphere.vertex_count == 10 * frequency ** 2 + 2
    assert sphere.face_count == 20 * frequency ** 2
    assert np.linalg.norm(sphere.vertices, axis=1) == pytest.approx(np.full(sphere.vertex_count, 2.0))


def test_grid_and_torus_topology():
    assert grid(4, 3).vertex_count == 12
    assert grid(4, 3).face_count == 12
    assert torus(12, 8).euler_characteristic() == 0


def test_feature_sites_are_spread_out():
    base = geodesic_sphere(8)
    featured = sphere_with_features(frequency=8, features=20, height=0.1, seed=3)
    moved = np.flatnonzero(np.any(featured.vertices != base.vertices, axis=1))
    assert len(moved) == 20
    for v in moved:
        assert not set(featured.one_ring(v).tolist()) & set(moved.tolist())


def test_spike_grid_apex_ranks_first():
    assert stability_rank(spike_grid(11)).indices[0] == spike_apex(11)


def test_terrain_is_an_open_height_field():
    mesh = terrain(n=21, peaks=4, seed=1)
    assert mesh.vertex_count == 441
    assert mesh.euler_characteristic() == 1


def test_build_sample():
    assert build_sample("sphere", frequency=2).vertex_count == 42
    with pytest.raises(ValueError, match="unknown sample mesh"):
        build_sample("teapot")
