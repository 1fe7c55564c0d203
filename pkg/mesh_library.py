"""
Mesh Library for the Mesh Watermarking Toolkit
Builds the synthetic sample meshes used by tests, experiments and the `sample` command
"""

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from mesh_core import Mesh

logger = logging.getLogger(__name__)

# Golden-ratio icosahedron, outward-facing counter-clockwise faces
_PHI = (1.0 + 5.0 ** 0.5) / 2.0
_ICOSAHEDRON_VERTICES = np.array([
    [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
    [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
    [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
], dtype=np.float64)
_ICOSAHEDRON_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def triangle() -> Mesh:
    return Mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def tetrahedron() -> Mesh:
    """Regular tetrahedron with outward faces"""
    vertices = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
    return Mesh(vertices, [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])


def cube() -> Mesh:
    """Unit cube, two triangles per side"""
    vertices = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    faces = [
        [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
        [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
        [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
    ]
    return Mesh(vertices, faces)


def icosahedron(edge: float = 1.0) -> Mesh:
    return Mesh(_ICOSAHEDRON_VERTICES * (edge / 2.0), _ICOSAHEDRON_FACES)


def geodesic_sphere(frequency: int = 8, radius: float = 1.0) -> Mesh:
    """Icosahedron subdivided `frequency` times per edge and projected to a sphere

    Vertex count is 10 * frequency**2 + 2.
    """
    if frequency < 1:
        raise ValueError("frequency must be at least 1")
    points = []
    triangles = []
    offset = 0
    for a, b, c in _ICOSAHEDRON_VERTICES[_ICOSAHEDRON_FACES]:
        index = {}
        for i in range(frequency + 1):
            for j in range(frequency + 1 - i):
                index[i, j] = offset + len(index)
                points.append(a + (b - a) * (i / frequency) + (c - a) * (j / frequency))
        for i in range(frequency):
            for j in range(frequency - i):
                triangles.append((index[i, j], index[i + 1, j], index[i, j + 1]))
                if i + j < frequency - 1:
                    triangles.append((index[i + 1, j], index[i + 1, j + 1], index[i, j + 1]))
        offset += len(index)
    points = np.array(points)
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    # Merge the copies of vertices shared between icosahedron faces
    representative = np.array([min(ball) for ball in cKDTree(points).query_ball_point(points, r=1e-9)])
    keep = np.flatnonzero(representative == np.arange(len(points)))
    remap = np.full(len(points), -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    faces = remap[representative][np.array(triangles)]
    return Mesh(points[keep] * radius, faces)


def grid(nx: int, ny: int, height: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
         size: float = 1.0) -> Mesh:
    """Triangulated (nx x ny)-vertex height field over [-size/2, size/2]^2"""
    xs = np.linspace(-size / 2, size / 2, nx)
    ys = np.linspace(-size / 2, size / 2, ny)
    x, y = np.meshgrid(xs, ys, indexing="xy")
    z = np.zeros_like(x) if height is None else height(x, y)
    vertices = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    idx = np.arange(nx * ny).reshape(ny, nx)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    faces = np.vstack([np.column_stack([a, b, d]), np.column_stack([a, d, c])])
    return Mesh(vertices, faces)


def planar_fan(valence: int = 6) -> Mesh:
    """Flat disk: one interior vertex surrounded by `valence` triangles"""
    angles = np.linspace(0.0, 2 * np.pi, valence, endpoint=False)
    rim = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(valence)])
    vertices = np.vstack([[0.0, 0.0, 0.0], rim])
    faces = [[0, 1 + k, 1 + (k + 1) % valence] for k in range(valence)]
    return Mesh(vertices, faces)


def bowtie() -> Mesh:
    """Two triangles touching at vertex 0 only"""
    vertices = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [-1, 0, 0], [-1, -1, 0]]
    return Mesh(vertices, [[0, 1, 2], [0, 3, 4]])


def fin() -> Mesh:
    """Three triangles sharing the edge (0, 1)"""
    vertices = [[0, 0, 0], [1, 0, 0], [0.5, 1, 0], [0.5, -1, 0], [0.5, 0, 1]]
    return Mesh(vertices, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])


def displace_along_normals(mesh: Mesh, vertices: Iterable[int], heights) -> Mesh:
    """Push the given vertices along their vertex normals"""
    vertices = np.asarray(list(vertices), dtype=np.int64)
    normals = mesh.vertex_normals()
    moved = mesh.vertices.copy()
    moved[vertices] += normals[vertices] * np.broadcast_to(np.asarray(heights, dtype=np.float64), vertices.shape)[:, None]
    return mesh.with_vertices(moved)


def _spread_sites(mesh: Mesh, count: int, rng: np.random.Generator, exclude: Optional[np.ndarray] = None) -> np.ndarray:
    # Feature sites are pairwise non-adjacent so each keeps its own one-ring
    taken = np.zeros(mesh.vertex_count, dtype=bool)
    if exclude is not None:
        taken[exclude] = True
    sites = []
    for v in rng.permutation(mesh.vertex_count):
        if taken[v]:
            continue
        sites.append(int(v))
        taken[v] = True
        taken[mesh.one_ring(v)] = True
        for w in mesh.one_ring(v):
            taken[mesh.one_ring(w)] = True
        if len(sites) == count:
            break
    return np.array(sites, dtype=np.int64)


def _featured(mesh: Mesh, features: int, height: float, seed: int, exclude: Optional[np.ndarray] = None) -> Mesh:
    rng = np.random.default_rng(seed)
    sites = _spread_sites(mesh, features, rng, exclude)
    # Alternate outward spikes and inward pits
    signs = np.where(np.arange(len(sites)) % 2 == 0, 1.0, -1.0)
    jitter = rng.uniform(0.7, 1.3, len(sites))
    return displace_along_normals(mesh, sites, height * signs * jitter)


def sphere_with_features(frequency: int = 55, features: int = 240, height: float = 0.06, seed: int = 0) -> Mesh:
    """Geodesic sphere carrying sharp spikes and pits (frequency 55 gives 30252 vertices)"""
    return _featured(geodesic_sphere(frequency), features, height, seed)


def terrain(n: int = 173, peaks: int = 60, seed: int = 0) -> Mesh:
    """Open height field: flat plains, sharp cone peaks and craters (n = 173 gives 29929 vertices)"""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-0.45, 0.45, size=(peaks, 2))
    radii = rng.uniform(0.02, 0.05, size=peaks)
    heights = rng.uniform(0.02, 0.06, size=peaks) * np.where(np.arange(peaks) % 3 == 2, -1.0, 1.0)

    def height(x, y):
        z = np.zeros_like(x)
        for (cx, cy), r, h in zip(centers, radii, heights):
            d = np.hypot(x - cx, y - cy)
            z += h * np.clip(1.0 - d / r, 0.0, None)
        return z

    return grid(n, n, height)


def torus(major_segments: int = 150, minor_segments: int = 200, major_radius: float = 1.0,
          minor_radius: float = 0.35) -> Mesh:
    """Closed torus with outward faces"""
    u = np.linspace(0, 2 * np.pi, major_segments, endpoint=False)
    v = np.linspace(0, 2 * np.pi, minor_segments, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major_radius + minor_radius * np.cos(vv)
    vertices = np.column_stack([(ring * np.cos(uu)).ravel(), (ring * np.sin(uu)).ravel(),
                                (minor_radius * np.sin(vv)).ravel()])
    i, j = np.meshgrid(np.arange(major_segments), np.arange(minor_segments), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * minor_segments + j
    b = ((i + 1) % major_segments) * minor_segments + j
    c = ((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments
    d = i * minor_segments + (j + 1) % minor_segments
    faces = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return Mesh(vertices, faces)


def torus_with_spikes(major_segments: int = 150, minor_segments: int = 200, spikes: int = 240,
                      height: float = 0.04, seed: int = 0) -> Mesh:
    """Torus carrying spikes and pits (default 30000 vertices)"""
    return _featured(torus(major_segments, minor_segments), spikes, height, seed)


def spike_grid(n: int = 21, height: float = 0.3) -> Mesh:
    """Flat square grid with a single spike at its center vertex"""
    mesh = grid(n, n)
    moved = mesh.vertices.copy()
    moved[(n // 2) * n + n // 2, 2] = height
    return mesh.with_vertices(moved)


def spike_apex(n: int = 21) -> int:
    """Vertex index of the spike created by `spike_grid(n)`"""
    return (n // 2) * n + n // 2


def sphere_with_spike(frequency: int = 10, height: float = 0.3) -> Mesh:
    """Geodesic sphere with one outward spike at vertex 0"""
    return displace_along_normals(geodesic_sphere(frequency), [0], height)


SAMPLE_MESHES: Dict[str, Callable[..., Mesh]] = {
    "tetrahedron": tetrahedron,
    "cube": cube,
    "icosahedron": icosahedron,
    "sphere": geodesic_sphere,
    "sphere-features": sphere_with_features,
    "terrain": terrain,
    "torus": torus,
    "torus-spikes": torus_with_spikes,
    "spike-grid": spike_grid,
}

# The three acceptance meshes, roughly 30k vertices each
ACCEPTANCE_MESHES = ("sphere-features", "terrain", "torus-spikes")


def build_sample(name: str, **options) -> Mesh:
    """Build a registered sample mesh by name"""
    try:
        factory = SAMPLE_MESHES[name]
    except KeyError:
        raise ValueError(f"unknown sample mesh {name!r}; choose from {', '.join(sorted(SAMPLE_MESHES))}") from None
    mesh = factory(**options)
    logger.info("built sample mesh %s: %d vertices, %d faces", name, mesh.vertex_count, mesh.face_count)
    return mesh
