import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from helmkit_inversion.errors import DataFormatError, DomainError
from helmkit_inversion.geometry.mesh import (
    TriMesh,
    build_disk_mesh,
    edge_multiplicity,
    ring_count,
    triangle_adjacency,
)


class TestBuildDiskMesh:
    def test_coarse_sanity(self):
        mesh = build_disk_mesh(0.5)
        assert mesh.n_triangles >= 16
        assert mesh.signed_areas().sum() >= 0.95 * np.pi

    def test_default_resolution(self, fine_mesh):
        assert 4000 <= fine_mesh.n_triangles <= 9000
        assert abs(fine_mesh.signed_areas().sum() - np.pi) <= 0.005 * np.pi
        assert abs(fine_mesh.boundary_lengths().sum() - 2 * np.pi) <= 0.005 * 2 * np.pi

    def test_ring_structure(self):
        n = ring_count(0.05)
        mesh = build_disk_mesh(0.05)
        assert mesh.n_nodes == 1 + 3 * n * (n + 1)
        assert mesh.n_triangles == 6 * n * n

    def test_halving_h(self):
        ratio = build_disk_mesh(0.05).n_triangles / build_disk_mesh(0.1).n_triangles
        assert 3.5 <= ratio <= 4.5

    @pytest.mark.parametrize("h", [0.5, 0.2, 0.08, 0.05])
    def test_positive_orientation(self, h):
        assert np.all(build_disk_mesh(h).signed_areas() > 0.0)

    @pytest.mark.parametrize("h", [0.5, 0.2, 0.08, 0.05])
    def test_edge_lengths(self, h):
        assert build_disk_mesh(h).edge_lengths().max() <= 1.5 * h

    def test_boundary_nodes_on_circle(self, fine_mesh):
        boundary = np.unique(fine_mesh.boundary_edges)
        radius = np.linalg.norm(fine_mesh.nodes[boundary], axis=1)
        assert np.all(np.abs(radius - 1.0) <= 1e-12)
        assert np.all(np.linalg.norm(fine_mesh.nodes, axis=1) <= 1.0 + 1e-12)

    def test_boundary_edges_counterclockwise(self, coarse_mesh):
        p = coarse_mesh.nodes[coarse_mesh.boundary_edges]
        cross = p[:, 0, 0] * p[:, 1, 1] - p[:, 0, 1] * p[:, 1, 0]
        assert np.all(cross > 0.0)

    def test_conforming(self, medium_mesh):
        counts = edge_multiplicity(medium_mesh)
        assert set(counts.values()) == {1, 2}
        single = {edge for edge, c in counts.items() if c == 1}
        boundary = {tuple(sorted(e)) for e in medium_mesh.boundary_edges.tolist()}
        assert single == boundary

    def test_deterministic(self):
        a, b = build_disk_mesh(0.13), build_disk_mesh(0.13)
        assert_array_equal(a.nodes, b.nodes)
        assert_array_equal(a.triangles, b.triangles)
        assert_array_equal(a.boundary_edges, b.boundary_edges)

    @pytest.mark.parametrize("h", [0.005, 0.6, 0.0, -0.1])
    def test_rejects_out_of_range(self, h):
        with pytest.raises(DomainError):
            build_disk_mesh(h)

    def test_arrays_are_read_only(self, coarse_mesh):
        with pytest.raises(ValueError):
            coarse_mesh.nodes[0, 0] = 2.0


class TestAdjacency:
    def test_interior_triangles_have_three_neighbours(self, coarse_mesh):
        degree = np.asarray(triangle_adjacency(coarse_mesh).sum(axis=1)).ravel()
        assert degree.max() == 3
        # one boundary edge per triangle touching the circle
        assert np.sum(degree == 2) == len(coarse_mesh.boundary_edges)

    def test_symmetric(self, coarse_mesh):
        adjacency = triangle_adjacency(coarse_mesh)
        assert (adjacency != adjacency.T).nnz == 0


class TestMeshJson:
    def test_write_then_read(self, tmp_path, coarse_mesh):
        path = tmp_path / "mesh.json"
        coarse_mesh.write_json(path)
        with open(path) as f:
            assert set(json.load(f)) == {"nodes", "triangles", "boundary_edges"}
        loaded = TriMesh.read_json(path)
        assert_array_equal(loaded.nodes, coarse_mesh.nodes)
        assert_array_equal(loaded.triangles, coarse_mesh.triangles)
        assert_array_equal(loaded.boundary_edges, coarse_mesh.boundary_edges)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            TriMesh.read_json(tmp_path / "nope.json")

    def test_missing_key(self, tmp_path):
        path = tmp_path / "mesh.json"
        path.write_text(json.dumps({"nodes": [[0, 0]], "triangles": []}))
        with pytest.raises(DataFormatError):
            TriMesh.read_json(path)

    def test_dangling_index(self, tmp_path):
        path = tmp_path / "mesh.json"
        path.write_text(
            json.dumps(
                {"nodes": [[0, 0], [1, 0], [0, 1]], "triangles": [[0, 1, 3]], "boundary_edges": []}
            )
        )
        with pytest.raises(DataFormatError):
            TriMesh.read_json(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "mesh.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            TriMesh.read_json(path)
