"""Bessel functions of the first kind for the analytic background fields."""

from typing import Union

import numpy as np
from scipy import special

from helmkit_inversion.errors import DomainError

MAX_ORDER = 64
MAX_ARGUMENT = 100.0

ArrayLike = Union[float, np.ndarray]


def _check_range(n: int, x: ArrayLike) -> np.ndarray:
    """Validate order and argument range shared by bessel_j and bessel_j_prime.

    Args:
        n: Bessel order
        x: Argument(s)

    Returns:
        Argument(s) as a float array

    Raises:
        DomainError: If n or any x lies outside the supported range
    """
    if int(n) != n or n < 0 or n > MAX_ORDER:
        raise DomainError(f"Bessel order must be an integer in [0, {MAX_ORDER}], got {n}")
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise DomainError("Bessel argument must be finite")
    if np.any(x_arr < 0.0) or np.any(x_arr > MAX_ARGUMENT):
        raise DomainError(f"Bessel argument must lie in [0, {MAX_ARGUMENT}]")
    return x_arr


def bessel_j(n: int, x: ArrayLike) -> ArrayLike:
    """Evaluate J_n(x).

    Args:
        n: Nonnegative integer order, at most 64
        x: Scalar or array of arguments in [0, 100]

    Returns:
        J_n(x) with the shape of x
    """
    x_arr = _check_range(n, x)
    values = special.jv(int(n), x_arr)
    return float(values) if np.ndim(values) == 0 else values


def bessel_j_prime(n: int, x: ArrayLike) -> ArrayLike:
    """Evaluate J_n'(x) = (J_{n-1}(x) - J_{n+1}(x)) / 2, and -J_1(x) for n = 0."""
    x_arr = _check_range(n, x)
    values = special.jvp(int(n), x_arr)
    return float(values) if np.ndim(values) == 0 else values


def bessel_j_prime_scale(n: int, x: ArrayLike) -> ArrayLike:
    """(|J_{n-1}(x)| + |J_{n+1}(x)|) / 2, the magnitude J_n'(x) is measured against."""
    x_arr = _check_range(n, x)
    values = 0.5 * (np.abs(special.jv(int(n) - 1, x_arr)) + np.abs(special.jv(int(n) + 1, x_arr)))
    return float(values) if np.ndim(values) == 0 else values


def neumann_disk_eigenvalue_count(kappa2: float, max_order: int = MAX_ORDER) -> int:
    """Count Neumann eigenvalues of -Delta on the unit disk strictly below kappa2.

    The eigenvalues are 0 (constants), the squared positive zeros of J_0'
    and, with multiplicity two, the squared zeros of J_n' for n >= 1.

    Args:
        kappa2: Threshold, typically k^2 * q_max
        max_order: Largest Bessel order searched

    Returns:
        Number of eigenvalues (with multiplicity) below kappa2
    """
    if kappa2 <= 0.0:
        return 0
    count = 1
    bound = np.sqrt(kappa2)
    for order in range(max_order + 1):
        # first zero of J_n' exceeds n, so later orders cannot contribute
        if order > bound:
            break
        n_zeros = int(bound) + 2
        zeros = special.jnp_zeros(order, n_zeros)
        below = int(np.sum(zeros ** 2 < kappa2))
        count += below if order == 0 else 2 * below
    return count


def nearest_neumann_gap(kappa2: float, max_order: int = MAX_ORDER) -> float:
    """Relative distance from kappa2 to the closest nonzero Neumann eigenvalue."""
    bound = np.sqrt(kappa2) * 1.5 + 2.0
    gaps = []
    for order in range(max_order + 1):
        if order > bound:
            break
        zeros = special.jnp_zeros(order, int(bound) + 2)
        gaps.extend(np.abs(zeros ** 2 - kappa2) / kappa2)
    return float(min(gaps))
