"""
Mesh Core for the Mesh Watermarking Toolkit
Triangle mesh model, OBJ input/output, coordinate normalization and Hausdorff distortion
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, NamedTuple, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from watermark_errors import MeshFormatError

logger = logging.getLogger(__name__)

# Relative eigenvalue gap below which two principal axes count as tied
EIGEN_TIE_TOLERANCE = 1e-8

# OBJ records that carry no geometry we keep
_IGNORED_RECORDS = {"vt", "vn", "vp", "g", "o", "s", "l", "p", "usemtl", "mtllib", "cstype", "deg", "curv", "surf"}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh: vertex coordinates plus vertex-index triples"""
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise MeshFormatError(f"face index out of range for {len(vertices)} vertices")
            degenerate = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
            if degenerate.any():
                raise MeshFormatError(f"degenerate face {faces[np.argmax(degenerate)].tolist()}")
        vertices.setflags(write=False)
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @cached_property
    def vertex_face_incidence(self) -> sparse.csr_matrix:
        """V x F incidence matrix; row v lists the faces around v"""
        rows = self.faces.ravel()
        cols = np.repeat(np.arange(self.face_count), 3)
        data = np.ones(len(rows), dtype=np.int8)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.vertex_count, self.face_count))

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (low, high) pairs"""
        return np.unique(self._face_edges, axis=0) if self.face_count else np.empty((0, 2), dtype=np.int64)

    @cached_property
    def edge_face_counts(self) -> np.ndarray:
        """Number of faces incident to each entry of `edges`"""
        if not self.face_count:
            return np.empty(0, dtype=np.int64)
        _, counts = np.unique(self._face_edges, axis=0, return_counts=True)
        return counts

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric vertex adjacency with sorted column indices"""
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        matrix = sparse.csr_matrix((data, (rows, cols)), shape=(self.vertex_count, self.vertex_count))
        matrix.sort_indices()
        return matrix

    @cached_property
    def _face_edges(self) -> np.ndarray:
        f = self.faces
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.sort(pairs, axis=1)

    def incident_faces(self, v: int) -> np.ndarray:
        """Indices of faces containing vertex v"""
        m = self.vertex_face_incidence
        return m.indices[m.indptr[v]:m.indptr[v + 1]]

    def one_ring(self, v: int) -> np.ndarray:
        """Sorted indices of the vertices sharing an edge with v"""
        a = self.adjacency
        return a.indices[a.indptr[v]:a.indptr[v + 1]]

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalize=False), axis=1)

    def face_normals(self, normalize: bool = True) -> np.ndarray:
        """Face normals from the right-hand vertex order"""
        v = self.vertices
        n = np.cross(v[self.faces[:, 1]] - v[self.faces[:, 0]], v[self.faces[:, 2]] - v[self.faces[:, 0]])
        if normalize:
            length = np.linalg.norm(n, axis=1, keepdims=True)
            n = np.divide(n, length, out=np.zeros_like(n), where=length > 0)
        return n

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted vertex normals, unit length where defined"""
        weighted = self.face_normals(normalize=False)
        n = np.zeros_like(self.vertices)
        for corner in range(3):
            np.add.at(n, self.faces[:, corner], weighted)
        length = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, length, out=np.zeros_like(n), where=length > 0)

    def mean_edge_length(self) -> float:
        if not len(self.edges):
            return 0.0
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity, new coordinates"""
        return Mesh(vertices, self.faces)

    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges) + self.face_count


@dataclass(frozen=True, eq=False)
class NormalizationFrame:
    """Origin, principal-axis rotation and radial scale of a mesh"""
    origin: np.ndarray
    rotation: np.ndarray
    scale_ref: float
    # Set when principal axes could not be separated
    degenerate: bool = False

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Map model coordinates into the normalized frame"""
        return (np.asarray(points, dtype=np.float64) - self.origin) @ self.rotation.T

    def from_local(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation + self.origin

    def radial(self, points: np.ndarray) -> np.ndarray:
        """Normalized distance of each point from the origin"""
        return np.linalg.norm(np.asarray(points, dtype=np.float64) - self.origin, axis=-1) / self.scale_ref

    def with_radial(self, points: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Move points along their origin rays to the given normalized radii"""
        points = np.asarray(points, dtype=np.float64)
        offsets = points - self.origin
        current = np.linalg.norm(offsets, axis=-1)
        if np.any(current <= 0):
            raise ValueError("cannot set the radius of a point at the frame origin")
        factor = np.asarray(radii, dtype=np.float64) * self.scale_ref / current
        return self.origin + offsets * factor[..., None]


class SphericalCoord(NamedTuple):
    r: float
    theta: float
    phi: float
    # True when the point sits on the origin and the angles are conventional
    at_origin: bool = False


def _records(text: str) -> Iterable[Tuple[int, List[str]]]:
    pending = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if line.endswith("\\"):
            pending += line[:-1] + " "
            continue
        line = pending + line
        pending = ""
        tokens = line.split()
        if tokens:
            yield number, tokens


def _face_index(token: str, vertex_count: int, line_number: int) -> int:
    head = token.split("/", 1)[0]
    try:
        index = int(head)
    except ValueError:
        raise MeshFormatError(f"bad face index {token!r}", line_number) from None
    if index == 0:
        raise MeshFormatError("face index 0 is not valid in OBJ", line_number)
    # Negative indices count back from the vertices read so far
    return index - 1 if index > 0 else vertex_count + index


def parse_obj(text: str) -> Mesh:
    """Read the v/f subset of an ASCII OBJ file; polygons are fan-triangulated"""
    vertices: List[Tuple[float, float, float]] = []
    faces: List[Tuple[int, int, int]] = []
    for number, tokens in _records(text):
        keyword = tokens[0]
        if keyword == "v":
            if len(tokens) < 4:
                raise MeshFormatError("vertex record needs three coordinates", number)
            try:
                point = tuple(float(t) for t in tokens[1:4])
            except ValueError:
                raise MeshFormatError(f"bad vertex coordinate in {' '.join(tokens)!r}", number) from None
            if not np.all(np.isfinite(point)):
                raise MeshFormatError("non-finite vertex coordinate", number)
            vertices.append(point)
        elif keyword == "f":
            indices = [_face_index(t, len(vertices), number) for t in tokens[1:]]
            if len(indices) < 3:
                raise MeshFormatError("face record needs at least three indices", number)
            for index in indices:
                if index < 0 or index >= len(vertices):
                    raise MeshFormatError(f"face index {index + 1} out of range", number)
            if len(set(indices)) != len(indices):
                raise MeshFormatError(f"degenerate face {[i + 1 for i in indices]}", number)
            for k in range(1, len(indices) - 1):
                faces.append((indices[0], indices[k], indices[k + 1]))
        elif keyword in _IGNORED_RECORDS:
            continue
        else:
            raise MeshFormatError(f"unsupported record {keyword!r}", number)
    logger.debug("parsed OBJ with %d vertices and %d faces", len(vertices), len(faces))
    return Mesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(mesh: Mesh) -> str:
    """OBJ text with round-trip exact coordinates and 1-based faces"""
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def load_obj(path) -> Mesh:
    with open(path, "r", encoding="ascii", errors="replace") as handle:
        return parse_obj(handle.read())


def save_obj(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(write_obj(mesh))


def center_of_mass(mesh: Mesh) -> np.ndarray:
    """Unweighted mean of the vertex coordinates"""
    if mesh.vertex_count == 0:
        raise ValueError("center of mass of an empty mesh")
    return mesh.vertices.mean(axis=0)


def surface_center(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Area-weighted surface centroid plus per-face areas and centroids"""
    if mesh.face_count == 0:
        raise ValueError("surface center of a mesh without faces")
    areas = mesh.face_areas()
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    total = areas.sum()
    if total <= 0:
        raise ValueError("surface center of a mesh with zero area")
    return (centroids * areas[:, None]).sum(axis=0) / total, areas, centroids


def _orient(axis: np.ndarray, centered: np.ndarray) -> np.ndarray:
    # The vertex with the largest projection magnitude must project positively
    projection = centered @ axis
    if projection[int(np.argmax(np.abs(projection)))] < 0:
        return -axis
    return axis


def principal_axes(centered: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Rotation whose rows are (x, y, z) axes with z along the largest variance"""
    covariance = centered.T @ centered / len(centered)
    values, vectors = np.linalg.eigh(covariance)
    scale = max(float(values[-1]), np.finfo(float).tiny)

    def tied(a: float, b: float) -> bool:
        return abs(a - b) <= EIGEN_TIE_TOLERANCE * scale

    pairs = []
    for i in range(2, -1, -1):
        vector = vectors[:, i]
        if vector[np.flatnonzero(np.abs(vector) > 1e-12)[0]] < 0:
            vector = -vector
        pairs.append((float(values[i]), vector))
    # Tied eigenvalues fall back to lexicographic eigenvector order
    for _ in range(2):
        for i in range(2):
            if tied(pairs[i][0], pairs[i + 1][0]) and tuple(pairs[i + 1][1]) > tuple(pairs[i][1]):
                pairs[i], pairs[i + 1] = pairs[i + 1], pairs[i]
    degenerate = tied(values[0], values[1]) or tied(values[1], values[2])
    z = _orient(pairs[0][1], centered)
    x = _orient(pairs[1][1], centered)
    y = np.cross(z, x)
    return np.vstack([x, y, z]), degenerate


def pca_align(mesh: Mesh) -> Tuple[Mesh, NormalizationFrame]:
    """Center the mesh on its vertex mean and rotate its principal axis onto z"""
    if mesh.vertex_count < 3:
        raise ValueError("PCA alignment needs at least three vertices")
    origin = center_of_mass(mesh)
    centered = mesh.vertices - origin
    radii = np.linalg.norm(centered, axis=1)
    if not np.any(radii > 0):
        raise ValueError("PCA alignment of coincident vertices")
    if np.linalg.matrix_rank(centered, tol=1e-12 * radii.max()) < 2:
        raise ValueError("PCA alignment of collinear vertices")
    rotation, degenerate = principal_axes(centered)
    if degenerate:
        logger.warning("principal axes are not unique; applying the deterministic tie-break")
    frame = NormalizationFrame(origin, rotation, float(radii.mean()), degenerate)
    return mesh.with_vertices(frame.to_local(mesh.vertices)), frame


def normalization_frame(mesh: Mesh, reference: str = "vertex") -> NormalizationFrame:
    """Frame used for radial quantization

    reference "vertex" takes origin and scale from the vertex mean and mean vertex
    radius; "surface" uses the area-weighted surface centroid and mean radius,
    which move little when flat regions are decimated.
    """
    if reference == "vertex":
        return pca_align(mesh)[1]
    if reference == "surface":
        origin, areas, centroids = surface_center(mesh)
        centered = mesh.vertices - origin
        rotation, degenerate = principal_axes(centered)
        scale = float((np.linalg.norm(centroids - origin, axis=1) * areas).sum() / areas.sum())
        if scale <= 0:
            raise ValueError("surface frame with zero radius")
        return NormalizationFrame(origin, rotation, scale, degenerate)
    raise ValueError(f"unknown frame reference {reference!r}")


def to_spherical(point, frame: NormalizationFrame) -> SphericalCoord:
    """Spherical coordinates of a point in the normalized frame"""
    local = frame.to_local(np.asarray(point, dtype=np.float64).reshape(3))
    distance = float(np.linalg.norm(local))
    if distance == 0.0:
        return SphericalCoord(0.0, 0.0, 0.0, True)
    theta = float(np.arccos(np.clip(local[2] / distance, -1.0, 1.0)))
    phi = float(np.arctan2(local[1], local[0]))
    if phi >= np.pi:
        phi = -np.pi
    return SphericalCoord(distance / frame.scale_ref, theta, phi)


def from_spherical(coord: SphericalCoord, frame: NormalizationFrame) -> np.ndarray:
    distance = coord.r * frame.scale_ref
    sin_theta = np.sin(coord.theta)
    local = distance * np.array([sin_theta * np.cos(coord.phi), sin_theta * np.sin(coord.phi), np.cos(coord.theta)])
    return frame.from_local(local)


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two point sets (one point per row)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    # Flat input is a set of points on a line
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if len(a) == 0 or len(b) == 0:
        raise ValueError("Hausdorff distance of an empty point set")
    forward, _ = cKDTree(b).query(a)
    backward, _ = cKDTree(a).query(b)
    return float(max(forward.max(), backward.max()))
