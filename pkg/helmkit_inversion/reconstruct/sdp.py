"""Optional conic back end: the same problems as semidefinite programs.

Needs the 'sdp' extra (cvxpy). Meant for cross-checking the subgradient
solver on small instances.
"""

from typing import Optional, Tuple

import numpy as np
from absl import logging

from helmkit_inversion.errors import ConfigError
from helmkit_inversion.reconstruct.objectives import ObjectiveVariant
from helmkit_inversion.reconstruct.problem import ReconProblem


def _require_cvxpy():
    try:
        import cvxpy
    except ImportError:
        raise ConfigError("The SDP back end needs cvxpy: pip install 'helmkit-inversion[sdp]'")
    return cvxpy


def solve_sdp(problem: ReconProblem, solver: Optional[str] = None) -> Tuple[np.ndarray, float]:
    """Solve min trace(X) (+ delta ||R||_F) s.t. X >= 0, X >= R(a), 0 <= a <= u.

    The Frobenius variant drops X and minimizes ||R(a)||_F directly.

    Returns:
        Optimal coefficients (clipped into the box) and the optimal value
    """
    cp = _require_cvxpy()
    n = problem.stack.n
    a = cp.Variable(problem.m)
    residual = cp.Variable((n, n), symmetric=True)
    constraints = [
        residual == problem.vd - sum(a[m] * problem.stack[m] for m in range(problem.m)),
        a >= 0.0,
        a <= problem.upper,
    ]

    if problem.variant == ObjectiveVariant.FROBENIUS:
        cost = cp.norm(residual, "fro")
    else:
        x = cp.Variable((n, n), symmetric=True)
        constraints += [x >> 0, x - residual >> 0]
        cost = cp.trace(x)
        if problem.variant == ObjectiveVariant.EIGSUM_PENALIZED:
            cost = cost + problem.delta * cp.norm(residual, "fro")

    program = cp.Problem(cp.Minimize(cost), constraints)
    value = program.solve(solver=solver)
    logging.info(f"SDP {problem.variant.value}: status {program.status}, value {value:.6e}")
    return problem.project(np.asarray(a.value, dtype=float)), float(value)
