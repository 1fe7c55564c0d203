"""
Quantization Index Modulation for the Mesh Watermarking Toolkit
Scalar and sparse (spread-transform) QIM, applied to normalized vertex radii
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from mesh_core import Mesh, NormalizationFrame, normalization_frame
from watermark_errors import CapabilityError

logger = logging.getLogger(__name__)

# Marker emitted in place of a bit when a whole block was deleted
DELETED = -1

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class QimConfig:
    """Quantizer step, spreading length and projection key"""
    delta: float = 0.01
    spreading_length: int = 1
    key: int = 0
    frame_reference: str = "vertex"
    refine_passes: int = 4

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.spreading_length < 1:
            raise ValueError("spreading length must be at least 1")
        if self.refine_passes < 1:
            raise ValueError("refine_passes must be at least 1")


def _finite(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must be finite")
    return array


def qim_quantize(x: ArrayLike, u: ArrayLike, delta: float):
    """Nearest point of the coset for bit u: offsets +delta/4 for 0, -delta/4 for 1"""
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = _finite(x, "x")
    dither = np.where(np.asarray(u) == 0, delta / 4.0, -delta / 4.0)
    result = delta * np.floor((x - dither) / delta + 0.5) + dither
    return float(result) if result.ndim == 0 else result


def qim_detect(w: ArrayLike, delta: float):
    """Bit whose coset lies nearest to w; exact ties decode as 0"""
    w = _finite(w, "w")
    d0 = np.abs(w - qim_quantize(w, 0, delta))
    d1 = np.abs(w - qim_quantize(w, 1, delta))
    bits = (d1 < d0).astype(np.int8)
    return int(bits) if bits.ndim == 0 else bits


def _check_lengths(x: np.ndarray, p: np.ndarray) -> None:
    if x.shape[-1] != len(p):
        raise ValueError(f"vector length {x.shape[-1]} does not match projection length {len(p)}")


def sqim_embed(x_l: ArrayLike, p: np.ndarray, u: int, delta: float) -> np.ndarray:
    """Move x along p so that its projection lands on the coset of u"""
    x_l = _finite(x_l, "x")
    p = np.asarray(p, dtype=np.float64)
    _check_lengths(x_l, p)
    projection = float(x_l @ p)
    return x_l + (qim_quantize(projection, u, delta) - projection) * p


def sqim_detect(r_l: ArrayLike, p: np.ndarray, delta: float) -> int:
    r_l = _finite(r_l, "r")
    p = np.asarray(p, dtype=np.float64)
    _check_lengths(r_l, p)
    return qim_detect(float(r_l @ p), delta)


def generate_projection(key: int, length: int, block: int = 0) -> np.ndarray:
    """Unit vector of +-1/sqrt(L) entries, reproducible from (key, block)"""
    if length < 1:
        raise ValueError("projection length must be at least 1")
    rng = np.random.default_rng([int(key), int(block)])
    signs = rng.integers(0, 2, size=length) * 2 - 1
    return signs / np.sqrt(length)


def _projections(cfg: QimConfig, blocks: int) -> np.ndarray:
    return np.array([generate_projection(cfg.key, cfg.spreading_length, j) for j in range(blocks)]).reshape(
        blocks, cfg.spreading_length)


def _embed_once(mesh: Mesh, frame: NormalizationFrame, selection: np.ndarray, bits: np.ndarray,
                cfg: QimConfig) -> np.ndarray:
    length = cfg.spreading_length
    points = mesh.vertices[selection]
    x = frame.radial(points).reshape(-1, length)
    p = _projections(cfg, len(bits))
    projection = np.einsum("ij,ij->i", x, p)
    target = qim_quantize(projection, bits, cfg.delta)
    y = x + (np.atleast_1d(target) - projection)[:, None] * p
    if np.any(y <= 0):
        raise CapabilityError("selected vertices lie too close to the center for this quantizer step")
    vertices = mesh.vertices.copy()
    vertices[selection] = frame.with_radial(points, y.ravel())
    return vertices


def embed_bits_in_mesh(mesh: Mesh, selection: Sequence[int], bits: Sequence[int], cfg: QimConfig) -> Mesh:
    """Carry one bit per block of L selected vertices in their normalized radii

    The frame is re-derived from the marked mesh and the embedding repeated until
    origin and scale stop moving, so a detector that normalizes the marked mesh
    sees the same frame.
    """
    selection = np.asarray(selection, dtype=np.int64)
    bits = np.asarray(bits, dtype=np.int64)
    if len(selection) != len(bits) * cfg.spreading_length:
        raise CapabilityError(
            f"{len(bits)} bits at L={cfg.spreading_length} need {len(bits) * cfg.spreading_length} vertices, "
            f"got {len(selection)}")
    if len(np.unique(selection)) != len(selection):
        raise ValueError("selection contains a vertex more than once")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    if len(bits) == 0:
        return mesh

    frame = normalization_frame(mesh, cfg.frame_reference)
    marked = mesh
    for attempt in range(cfg.refine_passes):
        marked = mesh.with_vertices(_embed_once(mesh, frame, selection, bits, cfg))
        settled = normalization_frame(marked, cfg.frame_reference)
        drift = np.linalg.norm(settled.origin - frame.origin) + abs(settled.scale_ref - frame.scale_ref)
        logger.debug("embedding pass %d: frame drift %.3e", attempt + 1, drift)
        frame = settled
        if drift <= 1e-13 * frame.scale_ref:
            break
    return marked


def extract_bits_from_mesh(mesh: Mesh, selection: Sequence[int], cfg: QimConfig) -> np.ndarray:
    """Detect one bit per block; entries < 0 in `selection` mark deleted vertices

    A block with some vertices deleted is detected on its survivors with the
    surviving part of p rescaled to unit norm. A block with none left yields DELETED.
    """
    selection = np.asarray(selection, dtype=np.int64)
    length = cfg.spreading_length
    if len(selection) % length:
        raise ValueError(f"selection length {len(selection)} is not a multiple of L={length}")
    blocks = len(selection) // length
    if blocks == 0:
        return np.empty(0, dtype=np.int8)
    frame = normalization_frame(mesh, cfg.frame_reference)
    alive = selection >= 0
    radii = np.zeros(len(selection))
    radii[alive] = frame.radial(mesh.vertices[selection[alive]])
    radii = radii.reshape(blocks, length)
    alive = alive.reshape(blocks, length)
    p = _projections(cfg, blocks) * alive
    norms = np.linalg.norm(p, axis=1)
    bits = np.full(blocks, DELETED, dtype=np.int8)
    present = norms > 0
    projection = np.einsum("ij,ij->i", radii[present], p[present]) / norms[present]
    bits[present] = qim_detect(projection, cfg.delta)
    return bits
