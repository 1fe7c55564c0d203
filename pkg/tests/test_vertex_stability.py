import numpy as np
import pytest

from mesh_core import Mesh
from mesh_library import (bowtie, fin, geodesic_sphere, grid, icosahedron, planar_fan, sphere_with_spike, torus,
                          triangle)
from vertex_stability import (StabilityConfig, boundary_vertices, gaussian_curvature, mean_curvature,
                              nonmanifold_vertices, select_embedding_vertices, stability_rank, vertex_metrics)
from watermark_errors import CapabilityError


def test_flat_fan_has_zero_curvature():
    fan = planar_fan(6)
    assert abs(gaussian_curvature(fan, 0)) < 1e-9
    assert abs(mean_curvature(fan, 0)) < 1e-9


def test_cube_corner_angle_deficit(box):
    deficit = vertex_metrics(box).angle_deficit
    assert deficit == pytest.approx(np.full(8, np.pi / 2))


def test_icosahedron_vertex_angle_deficit():
    deficit = vertex_metrics(icosahedron(1.0)).angle_deficit
    assert deficit == pytest.approx(np.full(12, np.pi / 3))


@pytest.mark.parametrize("mesh, chi", [
    (geodesic_sphere(5), 2),
    (icosahedron(), 2),
    (torus(20, 12), 0),
])
def test_total_angle_deficit_matches_euler_characteristic(mesh, chi):
    assert mesh.euler_characteristic() == chi
    assert vertex_metrics(mesh).angle_deficit.sum() == pytest.approx(2 * np.pi * chi, abs=1e-9)


def test_tetrahedron_total_deficit_is_four_pi(tetra):
    assert vertex_metrics(tetra).angle_deficit.sum() == pytest.approx(4 * np.pi, abs=1e-9)


def test_sphere_mean_curvature_is_inverse_radius():
    radius = 2.0
    sphere = geodesic_sphere(16, radius=radius)
    metrics = vertex_metrics(sphere)
    valence = np.diff(sphere.adjacency.indptr)
    assert np.all(np.abs(metrics.mean_curvature[valence == 6] * radius - 1.0) < 0.05)


def test_saddle_and_bump_have_opposite_mean_curvature_signs():
    center = 5 * 11 + 5
    bump = grid(11, 11, lambda x, y: x ** 2 + y ** 2)
    saddle = grid(11, 11, lambda x, y: 0.5 * x ** 2 - y ** 2)
    h_bump = mean_curvature(bump, center)
    h_saddle = mean_curvature(saddle, center)
    assert h_bump != 0 and h_saddle != 0
    assert np.sign(h_bump) != np.sign(h_saddle)


def test_boundary_vertices():
    assert boundary_vertices(geodesic_sphere(2)) == set()
    assert boundary_vertices(triangle()) == {0, 1, 2}
    assert boundary_vertices(grid(2, 2)) == {0, 1, 2, 3}


def test_nonmanifold_vertices(tetra):
    assert nonmanifold_vertices(tetra) == set()
    assert nonmanifold_vertices(bowtie()) == {0}
    assert nonmanifold_vertices(fin()) == {0, 1}


def test_curvature_of_isolated_or_boundary_vertex_is_rejected():
    mesh = Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]])
    with pytest.raises(ValueError, match="isolated"):
        gaussian_curvature(mesh, 3)
    with pytest.raises(ValueError, match="boundary"):
        mean_curvature(mesh, 0)
    with pytest.raises(IndexError):
        gaussian_curvature(mesh, 9)


def test_spike_apex_ranks_first():
    ranking = stability_rank(sphere_with_spike(10, 0.3))
    assert ranking.indices[0] == 0


def test_flat_grid_ranking_is_empty():
    assert len(stability_rank(grid(6, 6))) == 0


def test_ranking_is_deterministic_and_well_formed(featured_sphere):
    first = stability_rank(featured_sphere)
    second = stability_rank(featured_sphere)
    assert np.array_equal(first.indices, second.indices)
    assert np.array_equal(first.scores, second.scores)
    assert np.all(np.diff(first.scores) <= 0)
    assert len(np.unique(first.indices)) == len(first.indices)
    assert first.rows()[0]["index"] == first.indices[0]


def test_ranking_excludes_boundary_and_nonmanifold_vertices():
    mesh = grid(9, 9, lambda x, y: np.sin(6 * x) * np.cos(5 * y) * 0.1)
    ranking = stability_rank(mesh, StabilityConfig(risky_percentile=0))
    assert not set(ranking.indices.tolist()) & boundary_vertices(mesh)


def test_ranking_needs_min_vertices(tetra):
    with pytest.raises(CapabilityError):
        stability_rank(tetra, StabilityConfig(min_vertices=5))


def test_negative_weight_is_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        StabilityConfig(w_mean=-0.1)


def test_config_digest_tracks_weights():
    assert StabilityConfig().digest() == StabilityConfig().digest()
    assert StabilityConfig().digest() != StabilityConfig(w_roughness=0.1).digest()


def test_ranking_survives_a_rigid_motion(featured_sphere, rng):
    # Jitter first so that no two vertices tie on curvature
    jitter = featured_sphere.vertices + rng.normal(scale=2e-3, size=featured_sphere.vertices.shape)
    mesh = featured_sphere.with_vertices(jitter)
    rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(rotation) < 0:
        rotation[:, 0] *= -1
    moved = mesh.with_vertices(mesh.vertices @ rotation.T + rng.normal(size=3))
    before, after = stability_rank(mesh), stability_rank(moved)
    assert np.array_equal(before.indices, after.indices)
    assert after.scores == pytest.approx(before.scores, abs=1e-9)


def test_select_embedding_vertices(featured_sphere):
    ranking = stability_rank(featured_sphere)
    assert np.array_equal(select_embedding_vertices(ranking, len(ranking)), ranking.indices)
    assert select_embedding_vertices(ranking, 1).tolist() == [ranking.indices[0]]
    assert np.array_equal(select_embedding_vertices(ranking, 30, order="index"), np.sort(ranking.indices[:30]))
    with pytest.raises(CapabilityError):
        select_embedding_vertices(ranking, len(ranking) + 1)
    with pytest.raises(ValueError):
        select_embedding_vertices(ranking, 0)
    with pytest.raises(ValueError, match="order"):
        select_embedding_vertices(ranking, 5, order="bogus")


def test_interleaving_permutes_the_chosen_set(featured_sphere):
    ranking = stability_rank(featured_sphere)
    plain = select_embedding_vertices(ranking, 40)
    mixed = select_embedding_vertices(ranking, 40, key=7, interleave=True)
    assert sorted(mixed.tolist()) == sorted(plain.tolist())
    assert not np.array_equal(mixed, plain)
    assert np.array_equal(mixed, select_embedding_vertices(ranking, 40, key=7, interleave=True))


def test_selected_vertices_are_interior_and_curved(featured_sphere):
    config = StabilityConfig()
    metrics = vertex_metrics(featured_sphere)
    chosen = select_embedding_vertices(stability_rank(featured_sphere, config), 40)
    assert not metrics.is_boundary[chosen].any()
    assert not metrics.is_nonmanifold[chosen].any()
    magnitude = np.abs(metrics.mean_curvature) + np.sqrt(
        np.clip(metrics.mean_curvature ** 2 - metrics.gaussian_curvature, 0, None))
    assert np.all(magnitude[chosen] >= np.percentile(magnitude, config.risky_percentile))


def test_roughness_is_zero_on_flat_fan():
    assert vertex_metrics(planar_fan(5)).roughness[0] == pytest.approx(0.0, abs=1e-12)
