from dataclasses import asdict, dataclass, field
from typing import Any, Dict

import numpy as np

from helmkit_inversion.errors import DomainError
from helmkit_inversion.forward.data import SensitivityStack, check_dimensions
from helmkit_inversion.numerics import linalg_spectral
from helmkit_inversion.reconstruct.objectives import ObjectiveVariant, parse_variant


@dataclass(frozen=True)
class SolverSettings:
    """Projected subgradient settings.

    Attributes:
        max_iterations: Iteration cap
        window: Iterations over which the best objective must improve
        stall_rtol: Stop when the best objective improves less than
            stall_rtol * (1 + |f|) over one window
        converged_rtol: At the iteration cap, report non-convergence when the
            last window still improved by more than converged_rtol * (1 + |f|)
        step_scale: Multiplier on the initial step s0
    """

    max_iterations: int = 2000
    window: int = 200
    stall_rtol: float = 1e-8
    converged_rtol: float = 1e-4
    step_scale: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 1 or self.window < 1:
            raise DomainError("max_iterations and window must be positive")
        if self.step_scale <= 0.0:
            raise DomainError(f"step_scale must be positive, got {self.step_scale}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ReconProblem:
    """Box-constrained minimization over the pixel coefficients a_m in [0, u_m]."""

    vd: np.ndarray
    stack: SensitivityStack
    upper: np.ndarray
    delta: float
    variant: ObjectiveVariant = ObjectiveVariant.EIGSUM_PENALIZED
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        object.__setattr__(self, "vd", linalg_spectral.as_symmetric(self.vd))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "variant", parse_variant(self.variant))
        check_dimensions(self.vd, self.stack)
        if self.upper.shape != (self.stack.m,):
            raise DomainError(
                f"Upper bounds have shape {self.upper.shape}, expected ({self.stack.m},)"
            )
        if not np.all(np.isfinite(self.upper)) or np.any(self.upper < 0.0):
            raise DomainError("Upper bounds must be finite and nonnegative")
        if self.delta < 0.0:
            raise DomainError(f"delta must be nonnegative, got {self.delta}")

    @classmethod
    def from_beta(
        cls,
        vd: np.ndarray,
        stack: SensitivityStack,
        beta: np.ndarray,
        contrast_bound: float,
        delta: float,
        variant=ObjectiveVariant.EIGSUM_PENALIZED,
        settings: SolverSettings = SolverSettings(),
    ) -> "ReconProblem":
        """Build the problem with u_m = min(q_min - q0, beta_m)."""
        upper = np.minimum(contrast_bound, np.asarray(beta, dtype=float))
        return cls(vd=vd, stack=stack, upper=upper, delta=delta, variant=variant, settings=settings)

    @property
    def m(self) -> int:
        return self.stack.m

    def residual(self, a: np.ndarray) -> np.ndarray:
        return self.vd - self.stack.contract(a)

    def project(self, a: np.ndarray) -> np.ndarray:
        return np.clip(a, 0.0, self.upper)
