"""P1 finite-element assembly on TriMesh.

All element matrices are assembled in coordinate form and summed into
CSR matrices, so every global matrix is exactly symmetric.
"""

import numpy as np
from scipy import sparse

from helmkit_inversion.errors import DegenerateTriangle, DomainError
from helmkit_inversion.fem import fields
from helmkit_inversion.geometry.mesh import TriMesh

MIN_AREA = 1e-14
MIN_INDEX = 1e-6
MAX_INDEX = 1e3
# pixel integrals of products of background fields; 36 points, exact to degree 11
GAUSS_ORDER = 6

# P1 mass matrix on a triangle of unit area
_REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
# P1 basis values at the edge midpoints opposite vertex 0, 1, 2 (rows: point, cols: basis)
_MIDPOINT_BASIS = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
# two-point Gauss rule on [0, 1]
_GAUSS_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


def triangle_areas(mesh: TriMesh) -> np.ndarray:
    """Positive triangle areas.

    Raises:
        DegenerateTriangle: If any area is below 1e-14
    """
    areas = mesh.signed_areas()
    bad = np.flatnonzero(areas < MIN_AREA)
    if bad.size:
        raise DegenerateTriangle(
            f"Triangle {bad[0]} has area {areas[bad[0]]:.3e}", triangle_index=int(bad[0])
        )
    return areas


def coefficient_field(mesh: TriMesh, values) -> np.ndarray:
    """Validate a per-triangle refractive index q.

    Raises:
        DomainError: If the shape is wrong or a value leaves [1e-6, 1e3]
    """
    q = np.broadcast_to(np.asarray(values, dtype=float), (mesh.n_triangles,)).copy()
    if np.any(q < MIN_INDEX) or np.any(q > MAX_INDEX) or not np.all(np.isfinite(q)):
        raise DomainError(f"Refractive index must lie in [{MIN_INDEX}, {MAX_INDEX}]")
    return q


def _scatter(mesh: TriMesh, local: np.ndarray) -> sparse.csr_matrix:
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    matrix = sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    matrix.sum_duplicates()
    return matrix


def basis_gradients(mesh: TriMesh) -> np.ndarray:
    """(n_triangles, 3, 2) constant gradients of the three local hat functions."""
    p = mesh.nodes[mesh.triangles]
    areas = triangle_areas(mesh)
    # grad phi_i = rot90(p_k - p_j) / (2 area) for the cyclic (i, j, k)
    edges = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    return np.stack([-edges[..., 1], edges[..., 0]], axis=-1) / (2.0 * areas[:, None, None])


def assemble_stiffness(mesh: TriMesh) -> sparse.csr_matrix:
    """K_ij = int grad phi_i . grad phi_j dx."""
    grads = basis_gradients(mesh)
    areas = triangle_areas(mesh)
    local = areas[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    return _scatter(mesh, local)


def assemble_mass(mesh: TriMesh, q) -> sparse.csr_matrix:
    """(M_q)_ij = int q phi_i phi_j dx for a per-triangle refractive index q.

    Raises:
        DomainError: If q leaves [1e-6, 1e3]
    """
    return assemble_weighted_mass(mesh, coefficient_field(mesh, q))


def assemble_weighted_mass(mesh: TriMesh, weights) -> sparse.csr_matrix:
    """Mass matrix for an arbitrary per-triangle weight, such as an indicator."""
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (mesh.n_triangles,))
    areas = triangle_areas(mesh)
    local = (areas * weights)[:, None, None] * _REFERENCE_MASS
    return _scatter(mesh, local)


def assemble_midpoint_load(mesh: TriMesh, weights, values: np.ndarray) -> np.ndarray:
    """Load vectors f_i = int w * u * phi_i dx with the 3-point edge-midpoint rule.

    Args:
        mesh: Mesh
        weights: Per-triangle constant factor w
        values: (n_triangles, 3, n_rhs) values of u at the edge midpoints

    Returns:
        (n_nodes, n_rhs) load matrix
    """
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (mesh.n_triangles,))
    active = np.flatnonzero(weights != 0.0)
    loads = np.zeros((mesh.n_nodes, values.shape[-1]))
    if active.size == 0:
        return loads
    scale = weights[active] * triangle_areas(mesh)[active] / 3.0
    local = np.einsum("pi,tpr->tir", _MIDPOINT_BASIS, values[active]) * scale[:, None, None]
    np.add.at(loads, mesh.triangles[active], local)
    return loads


def collapsed_gauss_rule(order: int):
    """Collapsed Gauss-Legendre rule on a triangle.

    The order x order tensor rule on the square is mapped onto the triangle
    by (s, t) -> (s, t (1 - s)), which keeps it exact for polynomials of
    degree 2 order - 1.

    Returns:
        Barycentric points (order ** 2, 3) and weights (order ** 2,) summing to 1
    """
    if order < 1:
        raise DomainError(f"Quadrature order must be positive, got {order}")
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    s, t = np.meshgrid(x, x, indexing="ij")
    s, t = s.ravel(), (t * (1.0 - s)).ravel()
    weights = 2.0 * (w[:, None] * w[None, :] * (1.0 - x)[:, None]).ravel()
    return np.column_stack([1.0 - s - t, s, t]), weights


def gauss_quadrature(mesh: TriMesh, order: int = GAUSS_ORDER):
    """Points (n_triangles, order ** 2, 2) and weights of the collapsed Gauss rule."""
    barycentric, weights = collapsed_gauss_rule(order)
    points = np.einsum("pk,tkd->tpd", barycentric, mesh.nodes[mesh.triangles])
    return points, triangle_areas(mesh)[:, None] * weights[None, :]


def boundary_quadrature(mesh: TriMesh):
    """Two-point Gauss rule on each boundary edge.

    Returns:
        points (n_edges, 2, 2), weights (n_edges, 2) and the linear shape
        values (2, 2) of the edge end nodes at the Gauss points
    """
    p = mesh.nodes[mesh.boundary_edges]
    shape = np.column_stack([1.0 - _GAUSS_S, _GAUSS_S])
    points = np.einsum("gk,ekd->egd", shape, p)
    weights = np.repeat(mesh.boundary_lengths()[:, None] / 2.0, 2, axis=1)
    return points, weights, shape


def boundary_load_matrix(mesh: TriMesh, n1: int) -> np.ndarray:
    """B[node, i] = int_{dOmega} g_i phi_node ds for the 2 n1 + 1 boundary modes."""
    points, weights, shape = boundary_quadrature(mesh)
    angles = np.arctan2(points[..., 1], points[..., 0])
    g = fields.boundary_basis(angles.ravel(), n1).reshape(*angles.shape, -1)
    local = np.einsum("eg,gk,egi->eki", weights, shape, g)
    loads = np.zeros((mesh.n_nodes, g.shape[-1]))
    np.add.at(loads, mesh.boundary_edges, local)
    return loads


def sparse_frobenius(matrix: sparse.spmatrix) -> float:
    return float(np.sqrt(matrix.multiply(matrix).sum()))
