"""
Vertex Stability for the Mesh Watermarking Toolkit
Curvature and topology metrics and the stability ranking that picks the vertices to mark
"""

import hashlib
import logging
from dataclasses import astuple, dataclass, fields
from typing import Set

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.stats import rankdata

from mesh_core import Mesh
from watermark_errors import CapabilityError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StabilityConfig:
    """Weights and thresholds of the stability score"""
    w_gaussian: float = 0.5
    w_mean: float = 0.3
    w_concave: float = 0.2
    w_roughness: float = 0.0
    # Vertices whose curvature magnitude falls below this percentile are risky
    risky_percentile: float = 20.0
    min_vertices: int = 4
    # Dimensionless curvature (times mean edge length) treated as flat
    flat_tolerance: float = 1e-9

    def __post_init__(self):
        if not 0.0 <= self.risky_percentile < 100.0:
            raise ValueError("risky_percentile must lie in [0, 100)")
        if min(self.w_gaussian, self.w_mean, self.w_concave, self.w_roughness) < 0:
            raise ValueError("stability weights must be non-negative")

    def digest(self) -> str:
        """Short identifier of this configuration"""
        text = ";".join(f"{f.name}={value!r}" for f, value in zip(fields(self), astuple(self)))
        return hashlib.sha256(text.encode("ascii")).hexdigest()[:16]


@dataclass(frozen=True)
class VertexMetrics:
    gaussian_curvature: float
    mean_curvature: float
    is_boundary: bool
    is_nonmanifold: bool
    one_ring_area: float
    roughness: float


@dataclass(frozen=True, eq=False)
class MeshMetrics:
    """Per-vertex metrics of a whole mesh, one array entry per vertex"""
    angle_deficit: np.ndarray
    gaussian_curvature: np.ndarray
    mean_curvature: np.ndarray
    is_boundary: np.ndarray
    is_nonmanifold: np.ndarray
    one_ring_area: np.ndarray
    roughness: np.ndarray

    def at(self, v: int) -> VertexMetrics:
        return VertexMetrics(float(self.gaussian_curvature[v]), float(self.mean_curvature[v]),
                             bool(self.is_boundary[v]), bool(self.is_nonmanifold[v]),
                             float(self.one_ring_area[v]), float(self.roughness[v]))


@dataclass(frozen=True, eq=False)
class StabilityRanking:
    """Eligible vertices in decreasing stability; parallel arrays"""
    scores: np.ndarray
    indices: np.ndarray
    config_digest: str
    gaussian: np.ndarray
    mean: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def rows(self):
        """Rows for CSV export"""
        return [
            {"rank": r, "index": int(i), "score": float(s), "gaussian_curvature": float(g), "mean_curvature": float(h)}
            for r, (i, s, g, h) in enumerate(zip(self.indices, self.scores, self.gaussian, self.mean))
        ]


def _corner_geometry(mesh: Mesh):
    # Interior angle and cotangent at each face corner, plus face areas
    v = mesh.vertices
    f = mesh.faces
    angles = np.empty(f.shape)
    cotangents = np.empty(f.shape)
    for k in range(3):
        a = v[f[:, k]]
        u = v[f[:, (k + 1) % 3]] - a
        w = v[f[:, (k + 2) % 3]] - a
        cross = np.linalg.norm(np.cross(u, w), axis=1)
        dot = np.einsum("ij,ij->i", u, w)
        angles[:, k] = np.arctan2(cross, dot)
        cotangents[:, k] = np.divide(dot, cross, out=np.zeros_like(dot), where=cross > 0)
    return angles, cotangents, mesh.face_areas()


def _boundary_mask(mesh: Mesh) -> np.ndarray:
    mask = np.zeros(mesh.vertex_count, dtype=bool)
    mask[mesh.edges[mesh.edge_face_counts == 1].ravel()] = True
    return mask


def _nonmanifold_mask(mesh: Mesh) -> np.ndarray:
    mask = np.zeros(mesh.vertex_count, dtype=bool)
    if not mesh.face_count:
        return mask
    mask[mesh.edges[mesh.edge_face_counts >= 3].ravel()] = True

    # Corners of a vertex are linked across each manifold edge; a vertex whose
    # corners fall into more than one group is a pinch point
    f = mesh.faces
    corner = np.arange(f.size).reshape(f.shape)
    ends = [(k, (k + 1) % 3) for k in range(3)]
    va = np.concatenate([f[:, a] for a, _ in ends])
    vb = np.concatenate([f[:, b] for _, b in ends])
    ca = np.concatenate([corner[:, a] for a, _ in ends])
    cb = np.concatenate([corner[:, b] for _, b in ends])
    swap = va > vb
    lo, hi = np.where(swap, vb, va), np.where(swap, va, vb)
    c_lo, c_hi = np.where(swap, cb, ca), np.where(swap, ca, cb)
    order = np.lexsort((hi, lo))
    keys = lo[order] * mesh.vertex_count + hi[order]
    _, starts, counts = np.unique(keys, return_index=True, return_counts=True)
    first = order[starts[counts == 2]]
    second = order[starts[counts == 2] + 1]
    rows = np.concatenate([c_lo[first], c_hi[first]])
    cols = np.concatenate([c_lo[second], c_hi[second]])
    graph = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(f.size, f.size))
    _, labels = connected_components(graph, directed=False)
    pairs = np.unique(np.column_stack([f.ravel(), labels]), axis=0)
    fans = np.bincount(pairs[:, 0], minlength=mesh.vertex_count)
    mask |= fans > 1
    return mask


def vertex_metrics(mesh: Mesh) -> MeshMetrics:
    """Curvatures, topology flags, areas and roughness of every vertex"""
    n = mesh.vertex_count
    f = mesh.faces
    angles, cotangents, areas = _corner_geometry(mesh)
    boundary = _boundary_mask(mesh)
    nonmanifold = _nonmanifold_mask(mesh)

    angle_sum = np.bincount(f.ravel(), weights=angles.ravel(), minlength=n)
    # Barycentric area: one third of every incident triangle
    area = np.bincount(f.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n)
    deficit = np.where(boundary, np.pi, 2 * np.pi) - angle_sum
    has_area = area > 0
    gaussian = np.full(n, np.nan)
    gaussian[has_area] = deficit[has_area] / area[has_area]

    v = mesh.vertices
    laplace = np.zeros((n, 3))
    for k in range(3):
        j, l = f[:, (k + 1) % 3], f[:, (k + 2) % 3]
        contribution = (cotangents[:, k] / 2.0)[:, None] * (v[l] - v[j])
        np.add.at(laplace, j, contribution)
        np.add.at(laplace, l, -contribution)
    normals = mesh.vertex_normals()
    magnitude = np.linalg.norm(laplace, axis=1)
    # Positive where the surface bends away from the outward normal (convex)
    sign = np.where(np.einsum("ij,ij->i", laplace, normals) > 0, -1.0, 1.0)
    mean = np.full(n, np.nan)
    interior = has_area & ~boundary
    mean[interior] = sign[interior] * magnitude[interior] / (2.0 * area[interior])

    e = mesh.edges
    d = v[e[:, 1]] - v[e[:, 0]]
    lengths = np.linalg.norm(d, axis=1)
    offset = np.bincount(e[:, 0], weights=np.abs(np.einsum("ij,ij->i", normals[e[:, 0]], d)), minlength=n)
    offset += np.bincount(e[:, 1], weights=np.abs(np.einsum("ij,ij->i", normals[e[:, 1]], d)), minlength=n)
    ring_length = np.bincount(e.ravel(), weights=np.repeat(lengths, 2), minlength=n)
    roughness = np.divide(offset, ring_length, out=np.zeros(n), where=ring_length > 0)

    return MeshMetrics(deficit, gaussian, mean, boundary, nonmanifold, area, roughness)


def _require_faces(mesh: Mesh, v: int) -> None:
    if not 0 <= v < mesh.vertex_count:
        raise IndexError(f"vertex {v} out of range")
    if len(mesh.incident_faces(v)) == 0:
        raise ValueError(f"vertex {v} is isolated")


def gaussian_curvature(mesh: Mesh, v: int) -> float:
    """Angle deficit over barycentric area at vertex v"""
    _require_faces(mesh, v)
    return float(vertex_metrics(mesh).gaussian_curvature[v])


def mean_curvature(mesh: Mesh, v: int) -> float:
    """Signed discrete mean curvature at interior vertex v"""
    _require_faces(mesh, v)
    metrics = vertex_metrics(mesh)
    if metrics.is_boundary[v]:
        raise ValueError(f"mean curvature is undefined at boundary vertex {v}")
    return float(metrics.mean_curvature[v])


def boundary_vertices(mesh: Mesh) -> Set[int]:
    return set(np.flatnonzero(_boundary_mask(mesh)).tolist())


def nonmanifold_vertices(mesh: Mesh) -> Set[int]:
    return set(np.flatnonzero(_nonmanifold_mask(mesh)).tolist())


def _percentile_rank(values: np.ndarray) -> np.ndarray:
    if len(values) == 1:
        return np.ones(1)
    return (rankdata(values, method="average") - 1.0) / (len(values) - 1.0)


def stability_rank(mesh: Mesh, config: StabilityConfig = StabilityConfig()) -> StabilityRanking:
    """Rank eligible vertices by the weighted curvature score, most stable first"""
    if mesh.vertex_count < config.min_vertices:
        raise CapabilityError(f"mesh has {mesh.vertex_count} vertices, ranking needs {config.min_vertices}")
    metrics = vertex_metrics(mesh)
    eligible = ~metrics.is_boundary & ~metrics.is_nonmanifold & (metrics.one_ring_area > 0)

    gaussian = np.nan_to_num(metrics.gaussian_curvature)
    mean = np.nan_to_num(metrics.mean_curvature)
    # Largest absolute principal curvature
    magnitude = np.abs(mean) + np.sqrt(np.clip(mean ** 2 - gaussian, 0.0, None))
    eligible &= magnitude * mesh.mean_edge_length() > config.flat_tolerance
    if eligible.any() and config.risky_percentile > 0:
        threshold = np.percentile(magnitude[eligible], config.risky_percentile)
        eligible &= magnitude >= threshold

    candidates = np.flatnonzero(eligible)
    if len(candidates) == 0:
        logger.info("no eligible vertices among %d", mesh.vertex_count)
        empty = np.empty(0)
        return StabilityRanking(empty, np.empty(0, dtype=np.int64), config.digest(), empty, empty)

    # Concave bowls: both principal curvatures bend toward the outward normal
    concave = ((gaussian[candidates] > 0) & (mean[candidates] < 0)).astype(float)
    scores = (config.w_gaussian * _percentile_rank(np.abs(gaussian[candidates]))
              + config.w_mean * _percentile_rank(np.abs(mean[candidates]))
              + config.w_concave * concave)
    if config.w_roughness:
        scores = scores + config.w_roughness * _percentile_rank(metrics.roughness[candidates])
    order = np.lexsort((candidates, -scores))
    indices = candidates[order]
    logger.info("ranked %d of %d vertices", len(indices), mesh.vertex_count)
    return StabilityRanking(scores[order], indices, config.digest(), gaussian[indices], mean[indices])


def select_embedding_vertices(ranking: StabilityRanking, count: int, key: int = 0,
                              interleave: bool = False, order: str = "rank") -> np.ndarray:
    """Top `count` ranked vertices, optionally in a key-seeded interleaved order

    order "rank" keeps decreasing stability; "index" sorts the chosen set by
    vertex index, which small displacements of the marked vertices cannot reorder.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if count > len(ranking):
        raise CapabilityError(f"requested {count} vertices but only {len(ranking)} are stable")
    if order not in ("rank", "index"):
        raise ValueError(f"unknown selection order {order!r}")
    chosen = ranking.indices[:count].copy()
    if order == "index":
        chosen.sort()
    if interleave:
        chosen = chosen[np.random.default_rng(key).permutation(count)]
    return chosen
