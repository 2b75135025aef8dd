"""Convex objectives of the residual R(a) = V^delta - sum_m a_m S_m.

Each objective reports its value and a matrix G with
<S_m, G>_F = -(subgradient)_m, so the subgradient over all pixels is one
contraction with the sensitivity stack.
"""

from abc import ABC, abstractmethod
from enum import Enum

import numpy as np

from helmkit_inversion.errors import ConfigError
from helmkit_inversion.numerics import linalg_spectral

NORM_FLOOR = 1e-14


class ObjectiveVariant(str, Enum):
    EIGSUM_PENALIZED = "eigsum_penalized"
    EIGSUM_PLAIN = "eigsum_plain"
    FROBENIUS = "frobenius"


class Objective(ABC):
    """Base class for all reconstruction objectives"""

    variant: ObjectiveVariant

    @abstractmethod
    def value(self, residual: np.ndarray, delta: float) -> float:
        """Objective value at the residual"""
        pass

    @abstractmethod
    def direction(self, residual: np.ndarray, delta: float) -> np.ndarray:
        """Matrix G whose pairing with S_m is minus the m-th subgradient component"""
        pass

    @staticmethod
    def _normalized(residual: np.ndarray) -> np.ndarray:
        norm = linalg_spectral.frobenius_norm(residual)
        if norm <= NORM_FLOOR:
            return np.zeros_like(residual)
        return residual / norm

    @staticmethod
    def _positive_projector(residual: np.ndarray) -> np.ndarray:
        """Sum of q_j q_j^T over eigenvalues above 1e-12 * ||R||_F."""
        w, q = linalg_spectral.eigh(residual)
        keep = q[:, w > linalg_spectral.positive_threshold(residual)]
        return keep @ keep.T


class EigsumPenalized(Objective):
    """sum of positive eigenvalues + delta * ||R||_F"""

    variant = ObjectiveVariant.EIGSUM_PENALIZED

    def value(self, residual, delta):
        return linalg_spectral.sum_positive_eigs(residual) + delta * linalg_spectral.frobenius_norm(
            residual
        )

    def direction(self, residual, delta):
        return self._positive_projector(residual) + delta * self._normalized(residual)


class EigsumPlain(Objective):
    """sum of positive eigenvalues"""

    variant = ObjectiveVariant.EIGSUM_PLAIN

    def value(self, residual, delta):
        return linalg_spectral.sum_positive_eigs(residual)

    def direction(self, residual, delta):
        return self._positive_projector(residual)


class Frobenius(Objective):
    """||R||_F"""

    variant = ObjectiveVariant.FROBENIUS

    def value(self, residual, delta):
        return linalg_spectral.frobenius_norm(residual)

    def direction(self, residual, delta):
        return self._normalized(residual)


_OBJECTIVES = {
    ObjectiveVariant.EIGSUM_PENALIZED: EigsumPenalized,
    ObjectiveVariant.EIGSUM_PLAIN: EigsumPlain,
    ObjectiveVariant.FROBENIUS: Frobenius,
}


def parse_variant(name) -> ObjectiveVariant:
    try:
        return ObjectiveVariant(name)
    except ValueError:
        raise ConfigError(
            f"Unknown objective variant '{name}', expected one of "
            f"{[v.value for v in ObjectiveVariant]}"
        )


def get_objective(variant) -> Objective:
    return _OBJECTIVES[parse_variant(variant)]()
