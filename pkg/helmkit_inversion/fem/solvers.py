"""Helmholtz solves and inertia counts on the discrete operator K - k^2 M_q."""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from absl import logging
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from helmkit_inversion.errors import DomainError, NearResonance
from helmkit_inversion.fem import assembly, fields
from helmkit_inversion.geometry.mesh import TriMesh

SOLVE_PIVOT_RTOL = 1e-10
INERTIA_PIVOT_RTOL = 1e-12
DENSE_FALLBACK_LIMIT = 8000


@dataclass
class SymmetricFactorization:
    """LDL^T-type factorization exposing the pivots of D.

    Attributes:
        solve: Callable solving A x = b for (n,) or (n, r) right-hand sides
        pivots: Eigenvalues of the block-diagonal D (one per row)
        method: 'superlu-diagonal' or 'dense-bunch-kaufman'
    """

    solve: Callable[[np.ndarray], np.ndarray]
    pivots: np.ndarray
    method: str

    @property
    def negative_count(self) -> int:
        return int(np.sum(self.pivots < 0.0))

    @property
    def min_abs_pivot(self) -> float:
        return float(np.min(np.abs(self.pivots)))


def factorize_symmetric(matrix: sparse.spmatrix) -> SymmetricFactorization:
    """Factor a sparse symmetric matrix and read its inertia from the pivots.

    SuperLU with diagonal pivoting in symmetric mode gives P A P^T = L U with
    U = D L^T whenever the row and column permutations coincide, so the signs
    of diag(U) are the inertia (Sylvester). Otherwise falls back to a dense
    Bunch-Kaufman LDL^T.

    Raises:
        NearResonance: If SuperLU meets an exactly zero pivot
    """
    matrix = sparse.csc_matrix(matrix)
    try:
        lu = sparse_linalg.splu(
            matrix,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as e:
        # SuperLU reports an exactly zero pivot this way
        raise NearResonance(f"Operator is singular: {e}", pivot=0.0)
    if np.array_equal(lu.perm_r, lu.perm_c):
        return SymmetricFactorization(
            solve=lu.solve, pivots=lu.U.diagonal().copy(), method="superlu-diagonal"
        )

    n = matrix.shape[0]
    if n > DENSE_FALLBACK_LIMIT:
        raise DomainError(
            f"SuperLU left the diagonal and n={n} exceeds the dense LDL^T limit"
        )
    logging.warning(f"SuperLU pivoted off the diagonal; dense LDL^T fallback (n={n})")
    _, d, _ = linalg.ldl(matrix.toarray(), lower=True)
    pivots = linalg.eigvalsh_tridiagonal(np.diag(d).copy(), np.diag(d, -1).copy())
    return SymmetricFactorization(
        solve=lu.solve, pivots=pivots, method="dense-bunch-kaufman"
    )


def helmholtz_operator(mesh: TriMesh, q, k: float):
    """Return (K - k^2 M_q, K)."""
    stiffness = assembly.assemble_stiffness(mesh)
    return stiffness - k ** 2 * assembly.assemble_mass(mesh, q), stiffness


def factorize_helmholtz(
    mesh: TriMesh, q, k: float, pivot_rtol: float = SOLVE_PIVOT_RTOL
) -> SymmetricFactorization:
    """Factor K - k^2 M_q and reject near-resonant wavenumbers.

    Raises:
        NearResonance: If a pivot magnitude falls below pivot_rtol * ||K||_F
    """
    operator, stiffness = helmholtz_operator(mesh, q, k)
    factor = factorize_symmetric(operator)
    floor = pivot_rtol * assembly.sparse_frobenius(stiffness)
    if factor.min_abs_pivot < floor:
        raise NearResonance(
            f"Pivot {factor.min_abs_pivot:.3e} below {floor:.3e}: k={k} is close to a "
            f"discrete Neumann eigenvalue",
            pivot=factor.min_abs_pivot,
        )
    return factor


def difference_loads(mesh: TriMesh, q, q0: float, k: float, n1: int) -> np.ndarray:
    """f_i^j = int k^2 (q - q0) u_{q0}^j phi_i dx for every basis index j."""
    contrast = k ** 2 * (np.broadcast_to(np.asarray(q, dtype=float), (mesh.n_triangles,)) - q0)
    values = np.zeros((mesh.n_triangles, 3, fields.basis_size(n1)))
    active = contrast != 0.0
    if np.any(active):
        midpoints = mesh.edge_midpoints()[active]
        values[active] = fields.background_fields(k, q0, n1, midpoints)
    return assembly.assemble_midpoint_load(mesh, contrast, values)


def solve_difference_fields(
    mesh: TriMesh, q, q0: float, k: float, n1: int
) -> np.ndarray:
    """Nodal v^j = u_q^j - u_{q0}^j for all basis indices, one factorization.

    Solves (K - k^2 M_q) v = f with homogeneous Neumann data.

    Returns:
        (n_nodes, N) nodal values
    """
    loads = difference_loads(mesh, q, q0, k, n1)
    if not np.any(loads):
        return np.zeros_like(loads)
    factor = factorize_helmholtz(mesh, q, k)
    return factor.solve(loads)


def solve_difference_field(mesh: TriMesh, q, q0: float, k: float, j: int) -> np.ndarray:
    """Nodal v^j for a single basis index j."""
    _, order = fields.basis_mode(j)
    return solve_difference_fields(mesh, q, q0, k, order)[:, j]


def solve_background_fem(mesh: TriMesh, k: float, q0: float, n1: int) -> np.ndarray:
    """FEM approximation of the background fields: (K - k^2 q0 M) u = B."""
    factor = factorize_helmholtz(mesh, q0, k)
    return factor.solve(assembly.boundary_load_matrix(mesh, n1))


def boundary_pairing(mesh: TriMesh, trace: np.ndarray, i: int) -> float:
    """int_{dOmega} g_i v ds with v linear on each boundary edge (2-point Gauss)."""
    _, order = fields.basis_mode(i)
    return float(assembly.boundary_load_matrix(mesh, order)[:, i] @ np.asarray(trace))


def boundary_pairing_matrix(mesh: TriMesh, traces: np.ndarray, n1: int) -> np.ndarray:
    """V_ij = int g_i v^j ds for nodal fields traces[:, j]."""
    return assembly.boundary_load_matrix(mesh, n1).T @ traces


def omega0_index(mesh: TriMesh, q0: float, qmax: float, r0: float) -> np.ndarray:
    """Layered comparison index: qmax on centroids with |x| < r0, q0 elsewhere."""
    radius = np.linalg.norm(mesh.centroids(), axis=1)
    return np.where(radius < r0, qmax, q0)


def dtilde_count(k: float, q0: float, qmax: float, r0: float, mesh: TriMesh) -> int:
    """Number of negative eigenvalues of K - k^2 M_qtilde.

    Args:
        k: Wavenumber
        q0: Background index
        qmax: Index inside the concentric disk Omega_0
        r0: Radius of Omega_0 in (0, 1]
        mesh: Mesh to discretize on

    Returns:
        Inertia count d(qtilde)

    Raises:
        DomainError: If r0 is outside (0, 1] or q0, qmax leave [1e-6, 1e3]
        NearResonance: If a pivot is below 1e-12 * ||K||_F
    """
    if not (0.0 < r0 <= 1.0):
        raise DomainError(f"r0 must lie in (0, 1], got {r0}")
    qtilde = assembly.coefficient_field(mesh, omega0_index(mesh, q0, qmax, r0))
    factor = factorize_helmholtz(mesh, qtilde, k, pivot_rtol=INERTIA_PIVOT_RTOL)
    count = factor.negative_count
    logging.info(
        f"d(qtilde) for k={k}, qmax={qmax}, r0={r0}: {count} ({factor.method})"
    )
    return count
