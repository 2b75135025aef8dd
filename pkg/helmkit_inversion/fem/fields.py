"""Boundary basis g_i and the analytic background fields u_{q0}^i on the unit disk.

Basis index 0 is the constant 1/sqrt(2 pi); index 2l - 1 is sin(l phi)/sqrt(pi)
and index 2l is cos(l phi)/sqrt(pi) for l = 1..n1, so N = 2 n1 + 1.
"""

from typing import Tuple

import numpy as np

from helmkit_inversion.errors import BackgroundResonance, DomainError
from helmkit_inversion.numerics.special_functions import (
    bessel_j,
    bessel_j_prime,
    bessel_j_prime_scale,
)

RESONANCE_TOL = 1e-8


def basis_size(n1: int) -> int:
    return 2 * n1 + 1


def basis_mode(index: int) -> Tuple[str, int]:
    """Return ('const' | 'sin' | 'cos', order) for a basis index."""
    if index < 0:
        raise DomainError(f"Basis index must be nonnegative, got {index}")
    if index == 0:
        return "const", 0
    order = (index + 1) // 2
    return ("sin" if index % 2 == 1 else "cos"), order


def _angular(kind: str, order: int, phi: np.ndarray) -> np.ndarray:
    if kind == "const":
        return np.full_like(phi, 1.0 / np.sqrt(2.0 * np.pi))
    trig = np.sin if kind == "sin" else np.cos
    return trig(order * phi) / np.sqrt(np.pi)


def boundary_basis(phi: np.ndarray, n1: int) -> np.ndarray:
    """(n_points, N) values of the orthonormal boundary basis at angles phi."""
    phi = np.asarray(phi, dtype=float)
    return np.column_stack(
        [_angular(*basis_mode(i), phi) for i in range(basis_size(n1))]
    )


def _radial_scale(k: float, q0: float, order: int) -> float:
    """1 / (k sqrt(q0) J_order'(k sqrt(q0))), raising when the denominator vanishes.

    The derivative counts as vanishing when it is below RESONANCE_TOL relative
    to the size of its two neighbouring Bessel terms, so high orders with a
    tiny but well-resolved J_n' stay usable.
    """
    kappa = k * np.sqrt(q0)
    derivative = bessel_j_prime(order, kappa)
    if abs(derivative) <= RESONANCE_TOL * bessel_j_prime_scale(order, kappa):
        raise BackgroundResonance(
            f"J_{order}'(k sqrt(q0)) = {derivative:.3e} vanishes for k={k}, q0={q0}"
        )
    return 1.0 / (kappa * derivative)


def background_field(k: float, q0: float, j: int, points) -> np.ndarray:
    """Analytic u_{q0}^j at polar points.

    Solves Delta u + k^2 q0 u = 0 in the unit disk with du/dr = g_j on r = 1.

    Args:
        k: Wavenumber
        q0: Background refractive index
        j: Basis index
        points: (n, 2) array of (r, phi) pairs

    Returns:
        (n,) field values

    Raises:
        BackgroundResonance: If J_order'(k sqrt(q0)) vanishes to 1e-8 relative precision
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r, phi = points[:, 0], points[:, 1]
    if np.any(r < 0.0) or np.any(r > 1.0 + 1e-12):
        raise DomainError("Background field is defined for 0 <= r <= 1")
    kind, order = basis_mode(j)
    radial = bessel_j(order, k * np.sqrt(q0) * np.minimum(r, 1.0))
    return radial * _radial_scale(k, q0, order) * _angular(kind, order, phi)


def background_radial_derivative(k: float, q0: float, j: int, points) -> np.ndarray:
    """du_{q0}^j/dr at polar points, via the Bessel derivative."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r, phi = points[:, 0], points[:, 1]
    kind, order = basis_mode(j)
    kappa = k * np.sqrt(q0)
    radial = kappa * bessel_j_prime(order, kappa * np.minimum(r, 1.0))
    return radial * _radial_scale(k, q0, order) * _angular(kind, order, phi)


def background_fields(k: float, q0: float, n1: int, xy: np.ndarray) -> np.ndarray:
    """All N background fields at Cartesian points.

    Args:
        xy: (..., 2) points inside the closed unit disk

    Returns:
        (..., N) values
    """
    xy = np.asarray(xy, dtype=float)
    flat = xy.reshape(-1, 2)
    polar = np.column_stack(
        [np.hypot(flat[:, 0], flat[:, 1]), np.arctan2(flat[:, 1], flat[:, 0])]
    )
    values = np.column_stack(
        [background_field(k, q0, j, polar) for j in range(basis_size(n1))]
    )
    return values.reshape(*xy.shape[:-1], -1)
