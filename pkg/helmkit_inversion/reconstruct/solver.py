"""Projected subgradient solver and its result container."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from absl import logging

from helmkit_inversion.errors import DataFormatError
from helmkit_inversion.reconstruct.objectives import ObjectiveVariant, get_objective
from helmkit_inversion.reconstruct.problem import ReconProblem

SUPPORT_FRACTION = 0.5
# subgradient components within TIE_ATOL * (1 + max |g|) of zero count as ties
TIE_ATOL = 1e-12
# a tie move is kept when the objective rises by at most TIE_RTOL * (1 + |f|)
TIE_RTOL = 1e-12
_TIE_VARIANTS = (ObjectiveVariant.EIGSUM_PENALIZED, ObjectiveVariant.EIGSUM_PLAIN)
CSV_COLUMNS = ["pixel", "centroid_x", "centroid_y", "a", "upper_bound", "in_support"]


def support_mask(a: np.ndarray, upper: np.ndarray, fraction: float = SUPPORT_FRACTION) -> np.ndarray:
    """Pixels with u_m > 0 and a_m >= fraction * max(u)."""
    a = np.asarray(a, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if upper.size == 0 or upper.max() <= 0.0:
        return np.zeros(upper.shape, dtype=bool)
    return (upper > 0.0) & (a >= fraction * upper.max())


@dataclass
class ReconResult:
    """Best iterate of a reconstruction run.

    Attributes:
        a: Pixel coefficients, 0 <= a_m <= u_m
        upper: Box upper bounds u_m
        objective_value: Objective at a
        trace: Best-so-far objective per iteration, starting with a = 0
        support: Boolean support mask
        iterations: Iterations performed
        converged: False when the iteration cap was hit while still improving
        saturated: Pixels moved to their upper bound by the tie-break
        settings: Echo of the variant, delta and solver settings
        centroids: Optional (M, 2) pixel centroids for export
    """

    a: np.ndarray
    upper: np.ndarray
    objective_value: float
    trace: List[float]
    support: np.ndarray
    iterations: int
    converged: bool
    saturated: int = 0
    settings: Dict[str, Any] = field(default_factory=dict)
    centroids: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return int(self.a.shape[0])

    def to_frame(self) -> pd.DataFrame:
        centroids = self.centroids if self.centroids is not None else np.full((self.m, 2), np.nan)
        return pd.DataFrame(
            {
                "pixel": np.arange(self.m),
                "centroid_x": centroids[:, 0],
                "centroid_y": centroids[:, 1],
                "a": self.a,
                "upper_bound": self.upper,
                "in_support": self.support.astype(int),
            },
            columns=CSV_COLUMNS,
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def sidecar(self) -> Dict[str, Any]:
        return {
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "saturated": self.saturated,
            "support_size": int(self.support.sum()),
            "settings": self.settings,
            "trace": self.trace,
        }

    def write_json(self, path: Union[str, Path], **extra) -> None:
        with open(path, "w") as f:
            json.dump({**self.sidecar(), **extra}, f, indent=2, sort_keys=True)

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "ReconResult":
        """Load coefficients, bounds and support; the trace is not restored."""
        try:
            df = pd.read_csv(path, float_precision="round_trip")
        except FileNotFoundError:
            raise FileNotFoundError(f"Reconstruction file not found: {path}")
        if list(df.columns) != CSV_COLUMNS:
            raise DataFormatError(f"{path}: expected columns {CSV_COLUMNS}")
        return cls(
            a=df["a"].to_numpy(dtype=float),
            upper=df["upper_bound"].to_numpy(dtype=float),
            objective_value=float("nan"),
            trace=[],
            support=df["in_support"].to_numpy().astype(bool),
            iterations=0,
            converged=True,
            centroids=df[["centroid_x", "centroid_y"]].to_numpy(dtype=float),
        )


def objective(problem: ReconProblem, a: np.ndarray) -> float:
    """Objective of the problem's variant at a."""
    return get_objective(problem.variant).value(problem.residual(a), problem.delta)


def subgradient(problem: ReconProblem, a: np.ndarray) -> np.ndarray:
    """Subgradient with components -<S_m, G(R(a))>_F."""
    g = get_objective(problem.variant).direction(problem.residual(a), problem.delta)
    return -problem.stack.inner(g)


def saturate_ties(
    problem: ReconProblem, a: np.ndarray, value: float, g: np.ndarray
) -> Tuple[np.ndarray, float, int]:
    """Move tied coordinates to their upper bound.

    A coordinate below u_m whose subgradient is numerically zero is a tie:
    raising it changes the objective only at second order, and for the
    eigenvalue-sum objectives not at all while the residual stays negative
    semidefinite. Each block of tied coordinates is set to u_m as a whole when
    the objective stays within TIE_RTOL of value; a rejected block is split in
    half and retried.

    Returns:
        The new point, its objective value and the number of coordinates moved
    """
    tol = TIE_ATOL * (1.0 + float(np.max(np.abs(g), initial=0.0)))
    tied = np.flatnonzero((a < problem.upper) & (np.abs(g) <= tol))
    if tied.size == 0:
        return a, value, 0

    ceiling = value + TIE_RTOL * (1.0 + abs(value))
    a = a.copy()
    moved = 0
    pending = [tied]
    while pending:
        block = pending.pop()
        trial = a.copy()
        trial[block] = problem.upper[block]
        trial_value = objective(problem, trial)
        if trial_value <= ceiling:
            a, value = trial, trial_value
            moved += block.size
        elif block.size > 1:
            half = block.size // 2
            pending.extend([block[half:], block[:half]])
    logging.info(f"Tie-break moved {moved} of {tied.size} tied pixels to their upper bound")
    return a, value, moved


def solve(problem: ReconProblem, centroids: Optional[np.ndarray] = None) -> ReconResult:
    """Minimize the objective over the box with projected subgradient steps.

    Starts at a = 0 with steps s_t = s0 / sqrt(t), s0 = ||u|| / ||g_0||,
    and returns the best iterate seen. For the eigenvalue-sum objectives the
    best iterate is then pushed toward the box upper bound along tied
    coordinates, which selects the saturated minimizer among equal values.
    """
    settings = problem.settings
    obj = get_objective(problem.variant)

    def evaluate(a):
        residual = problem.residual(a)
        value = obj.value(residual, problem.delta)
        g = -problem.stack.inner(obj.direction(residual, problem.delta))
        return value, g

    a = np.zeros(problem.m)
    value, g = evaluate(a)
    best_a, best_value = a.copy(), value
    trace = [best_value]
    diameter = float(np.linalg.norm(problem.upper))
    g_norm = float(np.linalg.norm(g))

    iterations = 0
    converged = True
    if diameter > 0.0 and g_norm > 0.0:
        s0 = settings.step_scale * diameter / g_norm
        converged = False
        for t in range(1, settings.max_iterations + 1):
            iterations = t
            a = problem.project(a - (s0 / np.sqrt(t)) * g)
            value, g = evaluate(a)
            if value < best_value:
                best_a, best_value = a.copy(), value
            trace.append(best_value)

            if not np.any(g):
                converged = True
                break
            if t >= settings.window:
                gain = trace[-settings.window - 1] - best_value
                if gain < settings.stall_rtol * (1.0 + abs(best_value)):
                    converged = True
                    break

        if not converged:
            window = min(settings.window, len(trace) - 1)
            gain = trace[-window - 1] - best_value
            converged = gain <= settings.converged_rtol * (1.0 + abs(best_value))
            if not converged:
                logging.warning(
                    f"NotConverged: objective still improved by {gain:.3e} over the "
                    f"last {window} iterations"
                )

    saturated = 0
    if problem.variant in _TIE_VARIANTS:
        _, best_g = evaluate(best_a)
        best_a, best_value, saturated = saturate_ties(problem, best_a, best_value, best_g)

    logging.info(
        f"{problem.variant.value}: objective {best_value:.6e} after {iterations} iterations"
    )
    return ReconResult(
        a=best_a,
        upper=problem.upper.copy(),
        objective_value=float(best_value),
        trace=[float(v) for v in trace],
        support=support_mask(best_a, problem.upper),
        iterations=iterations,
        converged=converged,
        saturated=saturated,
        settings={
            "variant": problem.variant.value,
            "delta": problem.delta,
            **settings.to_dict(),
        },
        centroids=centroids,
    )
