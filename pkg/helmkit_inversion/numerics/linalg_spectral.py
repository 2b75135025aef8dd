"""Dense symmetric matrix kernel.

Eigenvalues are always returned in descending order,
lambda_1 >= lambda_2 >= ... >= lambda_n.
"""

from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from helmkit_inversion.errors import (
    DomainError,
    NotPositiveDefinite,
    SingularFactor,
)

DENSE_LIMIT = 512
POSITIVE_EIG_RTOL = 1e-12
PIVOT_RTOL = 1e-14


def as_symmetric(a) -> np.ndarray:
    """Build a SymMatrix: a finite square float array symmetrized as (A + A^T) / 2.

    Raises:
        DomainError: If the input is not square, empty or contains NaN/Inf
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DomainError(f"Expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError("Matrix contains NaN or Inf entries")
    return 0.5 * (a + a.T)


def eigh(a) -> Tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a symmetric matrix.

    Args:
        a: Symmetric matrix of dimension at most 512

    Returns:
        Eigenvalues in descending order and the matching orthonormal
        eigenvectors as columns
    """
    a = as_symmetric(a)
    if a.shape[0] > DENSE_LIMIT:
        raise DomainError(
            f"Dense eigensolver is limited to n <= {DENSE_LIMIT}, got {a.shape[0]}"
        )
    w, q = np.linalg.eigh(a)
    return w[::-1].copy(), q[:, ::-1].copy()


def eigvalsh_desc(a) -> np.ndarray:
    """Eigenvalues only, descending. Accepts stacks of shape (..., n, n)."""
    a = np.asarray(a, dtype=float)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    return np.linalg.eigvalsh(a)[..., ::-1]


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float), "fro"))


def positive_threshold(a) -> float:
    """Eigenvalues above this count as positive: 1e-12 * ||A||_F."""
    return POSITIVE_EIG_RTOL * frobenius_norm(a)


def sum_positive_eigs(a) -> float:
    """Sum of the positive eigenvalues of a symmetric matrix.

    Equals the largest partial sum of the descending spectrum; roundoff
    eigenvalues at or below 1e-12 * ||A||_F are not counted.
    """
    w = eigvalsh_desc(as_symmetric(a))
    tau = positive_threshold(a)
    return float(np.sum(w[w > tau]))


def cholesky(a) -> np.ndarray:
    """Lower-triangular Cholesky factor L with A = L L^T.

    Raises:
        NotPositiveDefinite: With the 0-based index of the failing pivot when
            a pivot is non-positive or below 1e-14 * ||A||_F
    """
    a = as_symmetric(a)
    factor, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(
            f"Leading minor of order {info} is not positive definite",
            pivot_index=info - 1,
        )
    if info < 0:
        raise DomainError(f"dpotrf rejected argument {-info}")
    pivots = np.diag(factor) ** 2
    floor = PIVOT_RTOL * frobenius_norm(a)
    small = np.flatnonzero(pivots <= floor)
    if small.size:
        raise NotPositiveDefinite(
            f"Pivot {small[0]} is {pivots[small[0]]:.3e}, below {floor:.3e}",
            pivot_index=int(small[0]),
        )
    return np.tril(factor)


def count_negative(a, threshold: float = 0.0) -> int:
    """Number of eigenvalues strictly below threshold."""
    return int(np.sum(eigvalsh_desc(as_symmetric(a)) < threshold))


def congruence_eigs(lower, s) -> np.ndarray:
    """Eigenvalues of L^{-1} S L^{-T}, descending.

    Computed with two triangular solves and a symmetrization.

    Raises:
        SingularFactor: If any |L_ii| <= 1e-14
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.abs(np.diag(lower))
    if np.any(diag <= PIVOT_RTOL):
        raise SingularFactor(f"Triangular factor has |L_ii| = {diag.min():.3e}")
    s = as_symmetric(s)
    left = linalg.solve_triangular(lower, s, lower=True)
    w = linalg.solve_triangular(lower, left.T, lower=True)
    return eigvalsh_desc(0.5 * (w + w.T))
