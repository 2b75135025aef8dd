"""Measurement matrices V, V^delta and the sensitivity stack S_m."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from absl import logging

from helmkit_inversion.errors import AsymmetryTooLarge, DimensionMismatch, DomainError
from helmkit_inversion.fem import assembly, fields, solvers
from helmkit_inversion.forward import io
from helmkit_inversion.forward.scenario import Scenario
from helmkit_inversion.geometry.mesh import TriMesh
from helmkit_inversion.numerics import linalg_spectral

ASYMMETRY_WARN = 1e-2
ASYMMETRY_FAIL = 0.05


@dataclass(frozen=True)
class Measurement:
    """Symmetrized V together with its pre-symmetrization asymmetry."""

    matrix: np.ndarray
    asymmetry: float

    @property
    def norm(self) -> float:
        return linalg_spectral.frobenius_norm(self.matrix)


@dataclass(frozen=True)
class SensitivityStack:
    """M symmetric N x N blocks, block m aligned with inversion triangle m."""

    matrices: np.ndarray

    def __post_init__(self):
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise DimensionMismatch(
                f"Sensitivity stack must be (M, N, N), got {self.matrices.shape}"
            )

    @property
    def m(self) -> int:
        return int(self.matrices.shape[0])

    @property
    def n(self) -> int:
        return int(self.matrices.shape[1])

    def __getitem__(self, index: int) -> np.ndarray:
        return self.matrices[index]

    def contract(self, a: np.ndarray) -> np.ndarray:
        """Sum_m a_m S_m."""
        return np.tensordot(np.asarray(a, dtype=float), self.matrices, axes=(0, 0))

    def inner(self, g: np.ndarray) -> np.ndarray:
        """<S_m, G>_F for every pixel m."""
        return np.einsum("mij,ij->m", self.matrices, g)

    def write_binary(self, path: Union[str, Path]) -> None:
        io.write_stack_binary(path, self.matrices)

    @classmethod
    def read_binary(cls, path: Union[str, Path]) -> "SensitivityStack":
        return cls(matrices=io.read_stack_binary(path))


def check_dimensions(matrix: np.ndarray, stack: SensitivityStack) -> None:
    if matrix.shape != (stack.n, stack.n):
        raise DimensionMismatch(
            f"Data matrix is {matrix.shape} but sensitivities are {stack.n}x{stack.n}"
        )


def asymmetry(matrix: np.ndarray) -> float:
    norm = linalg_spectral.frobenius_norm(matrix)
    if norm == 0.0:
        return 0.0
    return linalg_spectral.frobenius_norm(matrix - matrix.T) / norm


def compute_V(sc: Scenario, mesh: Optional[TriMesh] = None) -> Measurement:
    """V_ij = int g_i v^j ds from FEM difference fields on the forward mesh.

    Args:
        sc: Scenario
        mesh: Forward mesh; built from sc.forward_h when omitted

    Returns:
        Symmetrized V with the asymmetry ||V - V^T||_F / ||V||_F

    Raises:
        NearResonance: If K - k^2 M_q is numerically singular
        DomainError: If q leaves [1e-6, 1e3] on the mesh
        AsymmetryTooLarge: If the asymmetry exceeds 0.05
    """
    mesh = mesh if mesh is not None else sc.forward_mesh()
    q = assembly.coefficient_field(mesh, sc.index_field(mesh))
    traces = solvers.solve_difference_fields(mesh, q, sc.q0, sc.k, sc.n1)
    raw = solvers.boundary_pairing_matrix(mesh, traces, sc.n1)

    skew = asymmetry(raw)
    if skew > ASYMMETRY_FAIL:
        raise AsymmetryTooLarge(
            f"V asymmetry {skew:.3e} exceeds {ASYMMETRY_FAIL}; refine forward_h"
        )
    if skew > ASYMMETRY_WARN:
        logging.warning(f"V asymmetry {skew:.3e} is above {ASYMMETRY_WARN}")
    logging.info(
        f"Computed V ({raw.shape[0]}x{raw.shape[0]}) on {mesh.n_triangles} "
        f"triangles, asymmetry {skew:.3e}"
    )
    return Measurement(matrix=0.5 * (raw + raw.T), asymmetry=skew)


def compute_S(sc: Scenario, mesh: Optional[TriMesh] = None) -> SensitivityStack:
    """S_m = int_{P_m} k^2 u^i u^j dx with analytic background fields.

    The integral uses a 36-point collapsed Gauss rule on each inversion
    triangle, so every block is a Gram matrix of rank at most 36.
    """
    mesh = mesh if mesh is not None else sc.inversion_mesh()
    points, weights = assembly.gauss_quadrature(mesh)
    u = fields.background_fields(sc.k, sc.q0, sc.n1, points)
    matrices = sc.k ** 2 * np.einsum("tp,tpi,tpj->tij", weights, u, u)
    logging.info(f"Computed sensitivity stack M={mesh.n_triangles}, N={sc.n_basis}")
    return SensitivityStack(matrices=matrices)


def add_noise(matrix: np.ndarray, delta: float, seed: int) -> np.ndarray:
    """V^delta = sym(V + delta * E / ||E||_F) with E_ij uniform on [-1, 1).

    E is drawn from numpy's PCG64 stream seeded with seed.
    """
    if delta < 0.0:
        raise DomainError(f"Noise level must be nonnegative, got {delta}")
    matrix = np.asarray(matrix, dtype=float)
    if delta == 0.0:
        return matrix.copy()
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=matrix.shape)
    noisy = matrix + delta * noise / np.linalg.norm(noise, "fro")
    return 0.5 * (noisy + noisy.T)


def _discrete_forward(mesh: TriMesh, q, k: float, loads: np.ndarray) -> np.ndarray:
    factor = solvers.factorize_helmholtz(mesh, q, k)
    return loads.T @ factor.solve(loads)


def frechet_check(
    sc: Scenario,
    epsilons: Sequence[float],
    support: Optional[np.ndarray] = None,
    mesh: Optional[TriMesh] = None,
) -> pd.DataFrame:
    """Linearization residuals of the discrete forward map at q0.

    F_h(q) = B^T (K - k^2 M_q)^{-1} B has the exact derivative
    k^2 U0^T M_chi U0 with U0 = (K - k^2 q0 M)^{-1} B, so the residual
    r(eps) = ||F_h(q0 + eps chi) - F_h(q0) - eps F_h'(q0) chi||_F is of
    second order in eps.

    Args:
        sc: Scenario supplying k, q0, n1 and the default perturbation support
        epsilons: Perturbation magnitudes
        support: Boolean per-triangle mask of chi on the mesh; defaults to
            the triangles whose centroid lies in sc.geometry
        mesh: Mesh; built from sc.forward_h when omitted

    Returns:
        DataFrame with columns epsilon, residual, ratio (residual over the
        previous row's residual)
    """
    mesh = mesh if mesh is not None else sc.forward_mesh()
    if support is None:
        support = sc.geometry.contains(mesh.centroids())
    chi = np.asarray(support, dtype=float)
    if chi.shape != (mesh.n_triangles,):
        raise DimensionMismatch(f"Support mask has shape {chi.shape}")

    loads = assembly.boundary_load_matrix(mesh, sc.n1)
    derivative = frechet_derivative(sc, chi, mesh)
    reference = _discrete_forward(mesh, sc.q0, sc.k, loads)

    rows = []
    for eps in epsilons:
        if eps == 0.0:
            residual = 0.0
        else:
            perturbed = _discrete_forward(mesh, sc.q0 + eps * chi, sc.k, loads)
            residual = linalg_spectral.frobenius_norm(
                perturbed - reference - eps * derivative
            )
        ratio = residual / rows[-1]["residual"] if rows and rows[-1]["residual"] else np.nan
        rows.append({"epsilon": float(eps), "residual": residual, "ratio": ratio})
        logging.info(f"Frechet check eps={eps}: residual {residual:.3e}")
    return pd.DataFrame(rows, columns=["epsilon", "residual", "ratio"])


def frechet_derivative(sc: Scenario, support: np.ndarray, mesh: TriMesh) -> np.ndarray:
    """Discrete first-order term k^2 U0^T M_chi U0 for a per-triangle mask."""
    background = solvers.solve_background_fem(mesh, sc.k, sc.q0, sc.n1)
    chi = np.asarray(support, dtype=float)
    return sc.k ** 2 * background.T @ (assembly.assemble_weighted_mass(mesh, chi) @ background)
