import numpy as np
import pytest

from mesh_core import hausdorff, normalization_frame
from qim import (DELETED, QimConfig, embed_bits_in_mesh, extract_bits_from_mesh, generate_projection, qim_detect,
                 qim_quantize, sqim_detect, sqim_embed)
from vertex_stability import select_embedding_vertices, stability_rank
from watermark_errors import CapabilityError


@pytest.mark.parametrize("x, u, expected", [(0.3, 0, 0.25), (0.3, 1, 0.75), (0.25, 0, 0.25), (-0.6, 1, -0.25)])
def test_quantize_examples(x, u, expected):
    assert qim_quantize(x, u, 1.0) == pytest.approx(expected)


def test_detect_examples():
    assert qim_detect(0.75, 1.0) == 1
    assert qim_detect(0.25, 1.0) == 0
    # Midway between cosets
    assert qim_detect(0.5, 1.0) == 0


@pytest.mark.parametrize("delta", [1.0, 0.01])
@pytest.mark.parametrize("u", [0, 1])
def test_detect_tolerates_noise_below_a_quarter_step(delta, u, rng):
    epsilon = 1e-9 * delta
    for x in rng.uniform(-5, 5, size=50) * delta:
        point = qim_quantize(x, u, delta)
        for e in (delta / 4 - epsilon, -(delta / 4 - epsilon)):
            assert qim_detect(point + e, delta) == u


def test_quantizer_is_idempotent(rng):
    x = rng.uniform(-3, 3, size=1000)
    for u in (0, 1):
        once = qim_quantize(x, u, 0.1)
        assert qim_quantize(once, u, 0.1) == pytest.approx(once, abs=1e-12)


def test_coset_separation_is_half_step():
    k = np.arange(-20, 21)
    zeros = qim_quantize(k + 0.25, 0, 1.0)
    ones = qim_quantize(k - 0.25, 1, 1.0)
    assert np.min(np.abs(zeros[:, None] - ones[None, :])) == pytest.approx(0.5)


def _quantization_mse(samples, rng):
    delta = 0.01
    x = rng.uniform(0, 100 * delta, size=samples)
    u = rng.integers(0, 2, size=samples)
    return np.mean((qim_quantize(x, u, delta) - x) ** 2) / (delta ** 2 / 12)


def test_quantization_mse(rng):
    assert _quantization_mse(100_000, rng) == pytest.approx(1.0, rel=0.02)


@pytest.mark.slow
def test_quantization_mse_at_full_scale(rng):
    assert _quantization_mse(1_000_000, rng) == pytest.approx(1.0, rel=0.02)


def test_non_finite_or_bad_step_is_rejected():
    with pytest.raises(ValueError, match="finite"):
        qim_quantize(np.nan, 0, 1.0)
    with pytest.raises(ValueError, match="positive"):
        qim_quantize(0.1, 0, 0.0)


def test_sqim_embed_example():
    p = np.array([1.0, 1.0]) / np.sqrt(2)
    y = sqim_embed([0.1, 0.2], p, 1, 1.0)
    assert y == pytest.approx([-0.2268, -0.1268], abs=1e-4)
    assert y @ p == pytest.approx(-0.25, abs=1e-12)


def test_sqim_reduces_to_scalar_qim_and_keeps_coset_points():
    p = np.array([1.0])
    assert sqim_embed([0.3], p, 1, 1.0) == pytest.approx([0.75])
    assert sqim_embed([0.25], p, 0, 1.0) == pytest.approx([0.25])
    assert sqim_detect([0.75], p, 1.0) == qim_detect(0.75, 1.0)


def test_sqim_length_mismatch_is_rejected():
    with pytest.raises(ValueError, match="length"):
        sqim_embed([0.1, 0.2, 0.3], np.array([1.0, 0.0]), 0, 1.0)


def _sqim_noise_trials(trials, rng):
    delta = 0.05
    failures = 0
    for trial in range(trials):
        length = int(rng.integers(1, 9))
        p = generate_projection(trial, length)
        x = rng.normal(size=length)
        u = int(rng.integers(0, 2))
        y = sqim_embed(x, p, u, delta)
        assert np.linalg.norm(y - x) <= delta / 2 + 1e-12
        noise = rng.normal(size=length)
        noise *= rng.uniform(0, delta / 4 - 1e-6) / abs(noise @ p)
        failures += sqim_detect(y + noise, p, delta) != u
    return failures


def test_sqim_detection_under_bounded_noise(rng):
    assert _sqim_noise_trials(10_000, rng) == 0


@pytest.mark.slow
def test_sqim_detection_under_bounded_noise_full_scale(rng):
    assert _sqim_noise_trials(100_000, rng) == 0


def test_generate_projection():
    assert np.array_equal(generate_projection(5, 8), generate_projection(5, 8))
    p = generate_projection(3, 4)
    assert set(np.round(p, 12).tolist()) <= {0.5, -0.5}
    assert np.linalg.norm(p) == pytest.approx(1.0)
    assert not np.array_equal(generate_projection(1, 32), generate_projection(2, 32))
    assert not np.array_equal(generate_projection(1, 32, block=0), generate_projection(1, 32, block=1))
    with pytest.raises(ValueError):
        generate_projection(1, 0)


@pytest.fixture(scope="module")
def marked_setup(featured_sphere):
    selection = select_embedding_vertices(stability_rank(featured_sphere), 40, order="index")
    bits = np.random.default_rng(9).integers(0, 2, size=40)
    cfg = QimConfig(delta=0.01, key=11)
    return featured_sphere, selection, bits, cfg, embed_bits_in_mesh(featured_sphere, selection, bits, cfg)


def test_embedded_bits_are_recovered(marked_setup):
    _, selection, bits, cfg, marked = marked_setup
    assert np.array_equal(extract_bits_from_mesh(marked, selection, cfg), bits)


def test_embedding_moves_only_selected_vertices(marked_setup):
    mesh, selection, _, _, marked = marked_setup
    moved = np.flatnonzero(np.any(marked.vertices != mesh.vertices, axis=1))
    assert set(moved.tolist()) <= set(selection.tolist())
    assert np.array_equal(marked.faces, mesh.faces)


def test_embedding_distortion_bound(marked_setup):
    mesh, _, _, cfg, marked = marked_setup
    scale = normalization_frame(marked, cfg.frame_reference).scale_ref
    assert hausdorff(mesh.vertices, marked.vertices) <= cfg.delta / 2 * scale * (1 + 1e-6)


def test_embedding_keeps_directions_from_origin(marked_setup):
    mesh, selection, _, cfg, marked = marked_setup
    origin = normalization_frame(marked, cfg.frame_reference).origin
    before = mesh.vertices[selection] - origin
    after = marked.vertices[selection] - origin
    cosines = np.einsum("ij,ij->i", before, after) / np.linalg.norm(before, axis=1) / np.linalg.norm(after, axis=1)
    assert cosines == pytest.approx(np.ones(len(selection)), abs=1e-6)


def test_recovery_under_small_radial_noise(marked_setup, rng):
    _, selection, bits, cfg, marked = marked_setup
    frame = normalization_frame(marked, cfg.frame_reference)
    for _ in range(20):
        radii = frame.radial(marked.vertices[selection]) + rng.uniform(-cfg.delta / 8, cfg.delta / 8, len(selection))
        vertices = marked.vertices.copy()
        vertices[selection] = frame.with_radial(marked.vertices[selection], radii)
        assert np.array_equal(extract_bits_from_mesh(marked.with_vertices(vertices), selection, cfg), bits)


def test_recovery_after_rotation_translation_and_scaling(marked_setup, rng):
    _, selection, bits, cfg, marked = marked_setup
    rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    moved = marked.with_vertices(3.7 * marked.vertices @ rotation.T + [10.0, -4.0, 2.5])
    assert np.array_equal(extract_bits_from_mesh(moved, selection, cfg), bits)


def test_partial_block_uses_renormalized_projection(featured_sphere):
    cfg = QimConfig(delta=0.01, spreading_length=2, key=4)
    selection = select_embedding_vertices(stability_rank(featured_sphere), 20, order="index")
    bits = np.random.default_rng(2).integers(0, 2, size=10)
    marked = embed_bits_in_mesh(featured_sphere, selection, bits, cfg)
    assert np.array_equal(extract_bits_from_mesh(marked, selection, cfg), bits)

    damaged = selection.copy()
    damaged[0] = -1
    damaged[2:4] = -1
    detected = extract_bits_from_mesh(marked, damaged, cfg)
    frame = normalization_frame(marked, cfg.frame_reference)
    survivor = frame.radial(marked.vertices[selection[1]])
    sign = np.sign(generate_projection(cfg.key, 2, 0)[1])
    assert detected[0] == qim_detect(survivor * sign, cfg.delta)
    assert detected[1] == DELETED
    assert np.array_equal(detected[2:], bits[2:])


def test_embedding_argument_checks(featured_sphere):
    cfg = QimConfig()
    selection = select_embedding_vertices(stability_rank(featured_sphere), 4)
    with pytest.raises(CapabilityError):
        embed_bits_in_mesh(featured_sphere, selection[:3], [0, 1, 0, 1], cfg)
    with pytest.raises(ValueError, match="more than once"):
        embed_bits_in_mesh(featured_sphere, [selection[0]] * 4, [0, 1, 0, 1], cfg)
    with pytest.raises(ValueError, match="multiple"):
        extract_bits_from_mesh(featured_sphere, selection[:3], QimConfig(spreading_length=2))
    with pytest.raises(ValueError):
        QimConfig(delta=-1.0)
