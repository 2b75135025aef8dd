"""Structured polar-ring triangulations of the unit disk."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
from absl import logging
from scipy import sparse

from helmkit_inversion.errors import DataFormatError, DomainError

MIN_H = 0.01
MAX_H = 0.5
# ring spacing is h / sqrt(2); ring i carries 6 i nodes
RING_DENSITY = math.sqrt(2.0)


@dataclass(frozen=True)
class TriMesh:
    """P1 triangulation of the unit disk.

    Attributes:
        nodes: (n_nodes, 2) coordinates
        triangles: (n_triangles, 3) node indices, counterclockwise
        boundary_edges: (n_boundary, 2) node indices on |x| = 1, counterclockwise
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        for name in ("nodes", "triangles", "boundary_edges"):
            getattr(self, name).setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        """(n_triangles, 3, 2) midpoints of the edges opposite each local vertex."""
        p = self.nodes[self.triangles]
        return 0.5 * np.stack(
            [p[:, 1] + p[:, 2], p[:, 2] + p[:, 0], p[:, 0] + p[:, 1]], axis=1
        )

    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def boundary_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def to_dict(self) -> Dict[str, list]:
        return {
            "nodes": self.nodes.tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_edges": self.boundary_edges.tolist(),
        }

    def write_json(self, path: Union[str, Path]) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def read_json(cls, path: Union[str, Path]) -> "TriMesh":
        """Load a mesh written by write_json.

        Raises:
            FileNotFoundError: If the file doesn't exist
            DataFormatError: If a key is missing or an array has the wrong shape
        """
        try:
            with open(path, "r") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise FileNotFoundError(f"Mesh file not found: {path}")
        except json.JSONDecodeError as e:
            raise DataFormatError(f"Mesh file {path} is not valid JSON: {e}")
        try:
            nodes = np.asarray(data["nodes"], dtype=float).reshape(-1, 2)
            triangles = np.asarray(data["triangles"], dtype=np.int64).reshape(-1, 3)
            edges = np.asarray(data["boundary_edges"], dtype=np.int64).reshape(-1, 2)
        except (KeyError, ValueError) as e:
            raise DataFormatError(f"Mesh file {path} is malformed: {e}")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(nodes)):
            raise DataFormatError(f"Mesh file {path} references missing nodes")
        return cls(nodes=nodes, triangles=triangles, boundary_edges=edges)


def ring_count(target_h: float) -> int:
    return int(math.ceil(RING_DENSITY / target_h))


def _ring_nodes(i: int, n_rings: int) -> np.ndarray:
    count = 6 * i
    theta = 2.0 * np.pi * np.arange(count) / count
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    if i == n_rings:
        # boundary nodes sit on the circle up to roundoff
        return ring / np.linalg.norm(ring, axis=1, keepdims=True)
    return (i / n_rings) * ring


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> list:
    """Triangulate the annulus between two node rings by angular merging."""
    n_in, n_out = len(inner), len(outer)
    triangles = []
    a = b = 0
    while a < n_in or b < n_out:
        # angles of the next candidate nodes, 2*pi marks the wrap back to index 0
        next_in = 2.0 * np.pi * (a + 1) / n_in
        next_out = 2.0 * np.pi * (b + 1) / n_out
        if b < n_out and (a == n_in or next_out <= next_in):
            triangles.append((inner[a % n_in], outer[b], outer[(b + 1) % n_out]))
            b += 1
        else:
            triangles.append((inner[a], outer[b % n_out], inner[(a + 1) % n_in]))
            a += 1
    return triangles


def build_disk_mesh(target_h: float) -> TriMesh:
    """Build a deterministic polar-ring mesh of the unit disk.

    Args:
        target_h: Target mesh size in [0.01, 0.5]

    Returns:
        Conforming counterclockwise mesh with boundary nodes on |x| = 1

    Raises:
        DomainError: If target_h lies outside [0.01, 0.5]
    """
    if not (MIN_H <= target_h <= MAX_H):
        raise DomainError(f"target_h must lie in [{MIN_H}, {MAX_H}], got {target_h}")

    n_rings = ring_count(target_h)
    rings = [np.zeros((1, 2))] + [_ring_nodes(i, n_rings) for i in range(1, n_rings + 1)]
    offsets = np.cumsum([0] + [len(r) for r in rings])
    nodes = np.vstack(rings)

    triangles = []
    for i in range(1, n_rings + 1):
        inner = np.arange(offsets[i - 1], offsets[i])
        outer = np.arange(offsets[i], offsets[i + 1])
        if i == 1:
            triangles.extend(
                (0, outer[b], outer[(b + 1) % len(outer)]) for b in range(len(outer))
            )
        else:
            triangles.extend(_zip_rings(inner, outer))
    triangles = np.asarray(triangles, dtype=np.int64)

    # orient counterclockwise
    p = nodes[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    flip = (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]) < 0.0
    triangles[flip] = triangles[flip][:, [0, 2, 1]]

    boundary = np.arange(offsets[n_rings], offsets[n_rings + 1])
    boundary_edges = np.column_stack([boundary, np.roll(boundary, -1)])

    mesh = TriMesh(nodes=nodes, triangles=triangles, boundary_edges=boundary_edges)
    logging.info(
        f"Built disk mesh h={target_h}: {n_rings} rings, "
        f"{mesh.n_nodes} nodes, {mesh.n_triangles} triangles"
    )
    return mesh


def triangle_adjacency(mesh: TriMesh):
    """Sparse symmetric triangle-to-triangle adjacency through shared edges."""
    local = mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    keys = np.sort(local, axis=1)
    owner = np.repeat(np.arange(mesh.n_triangles), 3)
    order = np.lexsort((keys[:, 1], keys[:, 0]))
    keys, owner = keys[order], owner[order]
    same = np.all(keys[1:] == keys[:-1], axis=1)
    rows, cols = owner[:-1][same], owner[1:][same]
    data = np.ones(2 * rows.size)
    return sparse.coo_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(mesh.n_triangles, mesh.n_triangles),
    ).tocsr()


def edge_multiplicity(mesh: TriMesh) -> Dict[tuple, int]:
    """Count how many triangles share each undirected edge."""
    local = mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)
    keys, counts = np.unique(np.sort(local, axis=1), axis=0, return_counts=True)
    return {tuple(k): int(c) for k, c in zip(keys.tolist(), counts.tolist())}
