"""
Mesh Attacks for the Mesh Watermarking Toolkit
Quadric-error simplification and malicious region deletion, each with a ground-truth survival map
"""

import csv
import heapq
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Set, Tuple, Union

import numpy as np
from scipy.sparse.csgraph import dijkstra

from mesh_core import Mesh
from watermark_errors import CapabilityError, MeshFormatError

logger = logging.getLogger(__name__)

SURVIVAL_HEADER = ["original_index", "survived", "new_index"]

# Faces thinner than this (relative to squared mean edge length) block a collapse
_MIN_AREA_RATIO = 1e-12


@dataclass(frozen=True, eq=False)
class SurvivalMap:
    """Where each original vertex went: new_index[v] >= 0, or -1 when deleted"""
    new_index: np.ndarray
    original_faces: int
    remaining_faces: int

    @property
    def survived(self) -> np.ndarray:
        return self.new_index >= 0

    @property
    def original_count(self) -> int:
        return len(self.new_index)

    @property
    def deleted_count(self) -> int:
        return int(np.count_nonzero(self.new_index < 0))

    @property
    def achieved_fraction(self) -> float:
        return self.remaining_faces / self.original_faces if self.original_faces else 1.0

    def map_selection(self, selection: Sequence[int]) -> np.ndarray:
        """Attacked-mesh indices of the selected vertices, -1 where deleted"""
        selection = np.asarray(selection, dtype=np.int64)
        if selection.size and (selection.min() < 0 or selection.max() >= self.original_count):
            raise IndexError("selection refers to vertices outside the original mesh")
        return self.new_index[selection]

    def max_consecutive(self, selection: Sequence[int]) -> int:
        return deletion_pattern(selection, self).max_consecutive

    def then(self, later: "SurvivalMap") -> "SurvivalMap":
        """Map of this attack followed by `later`, applied to its output"""
        if later.original_count != np.count_nonzero(self.survived):
            raise ValueError("the later map does not start from this attack's output")
        new_index = np.where(self.survived, later.new_index[np.maximum(self.new_index, 0)], -1)
        return SurvivalMap(new_index, self.original_faces, later.remaining_faces)

    @classmethod
    def identity(cls, mesh: Mesh) -> "SurvivalMap":
        return cls(np.arange(mesh.vertex_count, dtype=np.int64), mesh.face_count, mesh.face_count)

    def save_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=SURVIVAL_HEADER)
            writer.writeheader()
            for original, new in enumerate(self.new_index):
                writer.writerow({"original_index": original, "survived": int(new >= 0), "new_index": int(new)})

    @classmethod
    def load_csv(cls, path: Union[str, Path]) -> "SurvivalMap":
        """Read a map written by save_csv; face counts are not stored and read back as 0"""
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != SURVIVAL_HEADER:
                raise MeshFormatError(f"survival map header must be {','.join(SURVIVAL_HEADER)}", 1)
            new_index = []
            for number, row in enumerate(reader, start=2):
                try:
                    original, survived, new = (int(row[key]) for key in SURVIVAL_HEADER)
                except (TypeError, ValueError):
                    raise MeshFormatError("expected three integers", number) from None
                if original != len(new_index) or survived != int(new >= 0):
                    raise MeshFormatError("rows must list original vertices in order with a consistent flag", number)
                new_index.append(new)
        new_index = np.array(new_index, dtype=np.int64)
        alive = new_index[new_index >= 0]
        if len(np.unique(alive)) != len(alive):
            raise MeshFormatError("two original vertices map to the same new index")
        return cls(new_index, 0, 0)


@dataclass(frozen=True, eq=False)
class DeletionPattern:
    survived: np.ndarray
    p_hat: float
    max_consecutive: int
    # Deleted marks whose predecessor in selection order was also deleted
    consecutive_pairs: int


def deletion_pattern(selection: Sequence[int], survival: SurvivalMap) -> DeletionPattern:
    """Survival bit per mark in selection order, p_d estimate and longest deleted streak"""
    survived = survival.map_selection(selection) >= 0
    if len(survived) == 0:
        return DeletionPattern(survived.astype(np.int8), 0.0, 0, 0)
    deleted = ~survived
    # Run lengths of deleted streaks
    padded = np.concatenate([[0], deleted.astype(np.int8), [0]])
    starts = np.flatnonzero(np.diff(padded) == 1)
    ends = np.flatnonzero(np.diff(padded) == -1)
    longest = int((ends - starts).max(initial=0))
    pairs = int(np.count_nonzero(deleted[1:] & deleted[:-1]))
    return DeletionPattern(survived.astype(np.int8), float(deleted.mean()), longest, pairs)


def _compact(mesh: Mesh, keep_vertices: np.ndarray, faces: np.ndarray) -> Tuple[Mesh, np.ndarray]:
    new_index = np.full(mesh.vertex_count, -1, dtype=np.int64)
    new_index[keep_vertices] = np.arange(np.count_nonzero(keep_vertices))
    return Mesh(mesh.vertices[keep_vertices], new_index[faces]), new_index


def region_delete(mesh: Mesh, center: int, radius_hops: int) -> Tuple[Mesh, SurvivalMap]:
    """Remove every vertex within radius_hops edges of center, with its faces"""
    if not 0 <= center < mesh.vertex_count:
        raise IndexError(f"center vertex {center} out of range")
    if radius_hops < 0:
        raise ValueError("radius_hops must be non-negative")
    hops = dijkstra(mesh.adjacency, directed=False, indices=center, unweighted=True, limit=radius_hops + 0.5)
    doomed = np.isfinite(hops)
    faces = mesh.faces[~doomed[mesh.faces].any(axis=1)]
    if len(faces) == 0:
        raise CapabilityError(f"deleting {int(doomed.sum())} vertices around {center} leaves no faces")
    attacked, new_index = _compact(mesh, ~doomed, faces)
    logger.info("region deletion around %d (%d hops) removed %d vertices", center, radius_hops, int(doomed.sum()))
    return attacked, SurvivalMap(new_index, mesh.face_count, len(faces))


class _Decimator:
    """Half-edge collapses in increasing quadric error; the surviving endpoint keeps its position"""

    def __init__(self, mesh: Mesh, seed: int):
        self.points = mesh.vertices
        self.faces = mesh.faces.copy()
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        self.vertex_alive = np.ones(mesh.vertex_count, dtype=bool)
        self.vertex_faces: List[Set[int]] = [set() for _ in range(mesh.vertex_count)]
        for f, face in enumerate(self.faces):
            for v in face:
                self.vertex_faces[v].add(f)
        adjacency = mesh.adjacency
        self.neighbors: List[Set[int]] = [
            set(adjacency.indices[adjacency.indptr[v]:adjacency.indptr[v + 1]].tolist()) for v in range(mesh.vertex_count)
        ]
        self.boundary = np.zeros(mesh.vertex_count, dtype=bool)
        self.boundary[mesh.edges[mesh.edge_face_counts == 1].ravel()] = True
        self.quadrics = self._initial_quadrics(mesh)
        self.min_area = _MIN_AREA_RATIO * mesh.mean_edge_length() ** 2
        self.rng = np.random.default_rng(seed)
        self.stamp = np.zeros(mesh.vertex_count, dtype=np.int64)
        self.heap: List[Tuple[float, float, int, int, int]] = []
        self.face_count = len(self.faces)

    @staticmethod
    def _initial_quadrics(mesh: Mesh) -> np.ndarray:
        normals = mesh.face_normals()
        d = -np.einsum("ij,ij->i", normals, mesh.vertices[mesh.faces[:, 0]])
        planes = np.column_stack([normals, d])
        fundamental = planes[:, :, None] * planes[:, None, :]
        quadrics = np.zeros((mesh.vertex_count, 4, 4))
        for corner in range(3):
            np.add.at(quadrics, mesh.faces[:, corner], fundamental)
        return quadrics

    def _push_outgoing(self, u: int) -> None:
        if self.boundary[u] or not self.neighbors[u]:
            return
        targets = np.fromiter(self.neighbors[u], dtype=np.int64)
        homogeneous = np.column_stack([self.points[targets], np.ones(len(targets))])
        costs = np.einsum("ij,jk,ik->i", homogeneous, self.quadrics[u], homogeneous)
        ties = self.rng.random(len(targets))
        for cost, tie, v in zip(costs, ties, targets):
            heapq.heappush(self.heap, (float(cost), float(tie), int(self.stamp[u]), u, int(v)))

    def _face_normal(self, a, b, c) -> np.ndarray:
        p = self.points
        return np.cross(p[b] - p[a], p[c] - p[a])

    def _collapsible(self, u: int, v: int) -> bool:
        if self.boundary[u] or v not in self.neighbors[u]:
            return False
        # Link condition for an interior edge: exactly the two opposite vertices are shared
        common = self.neighbors[u] & self.neighbors[v]
        if len(common) != 2 or any(len(self.neighbors[w]) <= 3 for w in common):
            return False
        for f in self.vertex_faces[u]:
            face = self.faces[f]
            if v in face:
                continue
            before = self._face_normal(*face)
            moved = np.where(face == u, v, face)
            after = self._face_normal(*moved)
            if 0.5 * np.linalg.norm(after) <= self.min_area or np.dot(before, after) <= 0:
                return False
        return True

    def _collapse(self, u: int, v: int) -> None:
        for f in list(self.vertex_faces[u]):
            face = self.faces[f]
            if v in face:
                self.face_alive[f] = False
                self.face_count -= 1
                for w in face:
                    self.vertex_faces[w].discard(f)
            else:
                face[face == u] = v
                self.vertex_faces[v].add(f)
        self.vertex_faces[u].clear()
        ring = self.neighbors[u]
        for w in ring:
            self.neighbors[w].discard(u)
            if w != v:
                self.neighbors[w].add(v)
                self.neighbors[v].add(w)
        self.neighbors[u] = set()
        self.vertex_alive[u] = False
        self.quadrics[v] += self.quadrics[u]
        for w in ring | {v}:
            self.stamp[w] += 1
            self._push_outgoing(w)

    def run(self, target_faces: int) -> None:
        for u in range(len(self.points)):
            self._push_outgoing(u)
        collapses = 0
        while self.face_count > target_faces and self.heap:
            _, _, stamp, u, v = heapq.heappop(self.heap)
            if stamp != self.stamp[u] or not self.vertex_alive[u] or not self.vertex_alive[v]:
                continue
            if not self._collapsible(u, v):
                continue
            self._collapse(u, v)
            collapses += 1
            if collapses % 5000 == 0:
                logger.info("simplification: %d collapses, %d faces left", collapses, self.face_count)


def simplify_mesh(mesh: Mesh, face_fraction: float, seed: int = 0) -> Tuple[Mesh, SurvivalMap]:
    """Decimate until at most face_fraction of the faces remain

    Boundary vertices are never removed. When no valid collapse is left the
    result keeps whatever fraction was reached; see SurvivalMap.achieved_fraction.
    """
    if not 0.0 < face_fraction <= 1.0:
        raise ValueError(f"face_fraction must lie in (0, 1], got {face_fraction}")
    if face_fraction == 1.0 or mesh.face_count == 0:
        return mesh, SurvivalMap.identity(mesh)
    target = int(np.floor(face_fraction * mesh.face_count))
    decimator = _Decimator(mesh, seed)
    decimator.run(target)
    faces = decimator.faces[decimator.face_alive]
    attacked, new_index = _compact(mesh, decimator.vertex_alive, faces)
    survival = SurvivalMap(new_index, mesh.face_count, len(faces))
    if len(faces) > target:
        logger.warning("simplification stopped early at %.3f of the faces (target %.3f)",
                       survival.achieved_fraction, face_fraction)
    logger.info("simplified %d -> %d vertices, %d -> %d faces", mesh.vertex_count, attacked.vertex_count,
                mesh.face_count, attacked.face_count)
    return attacked, survival
