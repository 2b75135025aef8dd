"""Per-pixel monotonicity bounds beta_m.

beta_m is the largest alpha >= 0 such that V^delta + delta I - alpha S_m has
at most d negative eigenvalues. The closed form factors
V^delta + delta I + alpha0 S_m = L L^T and reads beta_m off the (d+1)-th
eigenvalue of L^{-1} S_m L^{-T}; the bisection path checks the inertia
predicate directly and serves as the fallback for semidefinite S_m.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from absl import logging

from helmkit_inversion.errors import (
    DataFormatError,
    DomainError,
    HelmkitError,
    SemidefiniteSensitivity,
)
from helmkit_inversion.forward.data import SensitivityStack, check_dimensions
from helmkit_inversion.numerics import linalg_spectral

BETA_CAP = 1e6
EIG_FLOOR = 1e-14
SEMIDEFINITE_RTOL = 1e-14
REGULARIZATION_RTOL = 1e-12
BISECTION_TOL = 1e-10

CSV_COLUMNS = ["pixel", "centroid_x", "centroid_y", "beta", "delta", "d"]


def _shifted(vd, delta: float) -> np.ndarray:
    vd = linalg_spectral.as_symmetric(vd)
    return vd + delta * np.eye(vd.shape[0])


def _check_budget(d: int, n: int) -> None:
    if int(d) != d or d < 0 or d >= n:
        raise DomainError(f"d must be an integer in [0, {n}), got {d}")


def closed_form_details(vd, s, delta: float, d: int) -> Tuple[float, float, bool]:
    """Closed-form beta together with alpha0 and the cap flag.

    Returns:
        (beta, alpha0, capped)

    Raises:
        SemidefiniteSensitivity: If lambda_min(S) <= 1e-14 * ||S||_F
        NotPositiveDefinite: If the shifted matrix fails to factor
    """
    shifted = _shifted(vd, delta)
    s = linalg_spectral.as_symmetric(s)
    if s.shape != shifted.shape:
        raise DomainError(f"V is {shifted.shape} but S is {s.shape}")
    _check_budget(d, s.shape[0])

    s_min = linalg_spectral.eigvalsh_desc(s)[-1]
    if s_min <= SEMIDEFINITE_RTOL * linalg_spectral.frobenius_norm(s):
        raise SemidefiniteSensitivity(f"lambda_min(S) = {s_min:.3e} is not positive")

    v_min = linalg_spectral.eigvalsh_desc(shifted)[-1]
    alpha0 = (1.0 - v_min) / s_min if v_min <= 0.0 else 0.0

    lower = linalg_spectral.cholesky(shifted + alpha0 * s)
    mu = linalg_spectral.congruence_eigs(lower, s)[d]
    if mu <= EIG_FLOOR:
        return BETA_CAP, alpha0, True
    return max(0.0, 1.0 / mu - alpha0), alpha0, False


def beta_closed_form(vd, s, delta: float, d: int) -> float:
    """Closed-form monotonicity bound.

    Args:
        vd: Noisy data matrix V^delta
        s: Sensitivity block, positive definite
        delta: Noise level
        d: Inertia budget, 0 <= d < N

    Returns:
        max(0, 1 / lambda_{d+1}(L^{-1} S L^{-T}) - alpha0), capped at 1e6
    """
    return closed_form_details(vd, s, delta, d)[0]


def _feasible(shifted: np.ndarray, blocks: np.ndarray, alpha: np.ndarray, d: int):
    w = linalg_spectral.eigvalsh_desc(shifted - alpha[:, None, None] * blocks)
    return np.sum(w < 0.0, axis=-1) <= d


def _bisect(shifted: np.ndarray, blocks: np.ndarray, d: int, tol: float) -> np.ndarray:
    """Batched bisection of the inertia predicate over a stack of blocks."""
    m = blocks.shape[0]
    if not _feasible(shifted, blocks[:1], np.zeros(1), d)[0]:
        return np.zeros(m)

    lo = np.zeros(m)
    hi = np.ones(m)
    growing = _feasible(shifted, blocks, hi, d)
    while np.any(growing):
        lo[growing] = hi[growing]
        hi[growing] = np.minimum(2.0 * hi[growing], BETA_CAP)
        still = _feasible(shifted, blocks[growing], hi[growing], d) & (lo[growing] < BETA_CAP)
        growing[growing] = still

    active = lo < BETA_CAP
    while np.any(active):
        active &= (hi - lo) > tol * (1.0 + lo)
        if not np.any(active):
            break
        mid = 0.5 * (lo[active] + hi[active])
        ok = _feasible(shifted, blocks[active], mid, d)
        idx = np.flatnonzero(active)
        lo[idx[ok]] = mid[ok]
        hi[idx[~ok]] = mid[~ok]
    return np.where(lo >= BETA_CAP, BETA_CAP, 0.5 * (lo + hi))


def beta_bisection_oracle(vd, s, delta: float, d: int, tol: float = BISECTION_TOL) -> float:
    """Sup of {alpha >= 0: count_negative(V^delta - alpha S + delta I, 0) <= d}.

    The bracket doubles from 1 until infeasible or 1e6, then bisects to a
    relative width of tol. Returns 0 when alpha = 0 is already infeasible.
    """
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    shifted = _shifted(vd, delta)
    s = linalg_spectral.as_symmetric(s)
    _check_budget(d, s.shape[0])
    return float(_bisect(shifted, s[None], d, tol)[0])


@dataclass
class BetaMap:
    """Per-pixel monotonicity bounds with the per-pixel solver decisions."""

    beta: np.ndarray
    alpha0: np.ndarray
    fallback: np.ndarray
    capped: np.ndarray
    delta: float
    d: int
    centroids: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return int(self.beta.shape[0])

    def to_frame(self) -> pd.DataFrame:
        centroids = self.centroids if self.centroids is not None else np.full((self.m, 2), np.nan)
        return pd.DataFrame(
            {
                "pixel": np.arange(self.m),
                "centroid_x": centroids[:, 0],
                "centroid_y": centroids[:, 1],
                "beta": self.beta,
                "delta": np.full(self.m, self.delta),
                "d": np.full(self.m, self.d, dtype=int),
            },
            columns=CSV_COLUMNS,
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    @classmethod
    def read_csv(cls, path: Union[str, Path]) -> "BetaMap":
        """Load beta, centroids and the delta and d the map was computed with.

        Per-pixel solver decisions are not stored.

        Raises:
            DataFormatError: If a column is missing or delta and d vary across rows
        """
        try:
            df = pd.read_csv(path, float_precision="round_trip")
        except FileNotFoundError:
            raise FileNotFoundError(f"Beta map not found: {path}")
        if list(df.columns) != CSV_COLUMNS:
            raise DataFormatError(f"{path}: expected columns {CSV_COLUMNS}")
        if not np.array_equal(df["pixel"].to_numpy(), np.arange(len(df))):
            raise DataFormatError(f"{path}: pixel column must enumerate 0..M-1")
        if df.empty:
            raise DataFormatError(f"{path}: beta map has no pixels")
        if df["delta"].nunique() > 1 or df["d"].nunique() > 1:
            raise DataFormatError(f"{path}: delta and d must be the same on every row")
        m = len(df)
        return cls(
            beta=df["beta"].to_numpy(dtype=float),
            alpha0=np.zeros(m),
            fallback=np.zeros(m, dtype=bool),
            capped=np.zeros(m, dtype=bool),
            delta=float(df["delta"].iloc[0]),
            d=int(df["d"].iloc[0]),
            centroids=df[["centroid_x", "centroid_y"]].to_numpy(dtype=float),
        )


def compute_beta_map(
    vd,
    stack: SensitivityStack,
    delta: float,
    d: int,
    centroids: Optional[np.ndarray] = None,
) -> BetaMap:
    """Apply the closed form to every pixel, bisecting where it does not apply.

    Semidefinite blocks are regularized by 1e-12 * ||S_m||_F * I before
    bisection; other factorization failures bisect on S_m itself.

    Raises:
        DimensionMismatch: If V and the stack disagree on N
    """
    vd = linalg_spectral.as_symmetric(vd)
    check_dimensions(vd, stack)
    _check_budget(d, stack.n)

    beta = np.zeros(stack.m)
    alpha0 = np.zeros(stack.m)
    fallback = np.zeros(stack.m, dtype=bool)
    capped = np.zeros(stack.m, dtype=bool)
    fallback_blocks = []

    for m in range(stack.m):
        block = stack[m]
        try:
            beta[m], alpha0[m], capped[m] = closed_form_details(vd, block, delta, d)
        except SemidefiniteSensitivity:
            fallback[m] = True
            scale = REGULARIZATION_RTOL * linalg_spectral.frobenius_norm(block)
            fallback_blocks.append(block + scale * np.eye(stack.n))
            logging.vlog(1, f"Pixel {m}: semidefinite S_m, regularized bisection")
        except HelmkitError as e:
            fallback[m] = True
            fallback_blocks.append(linalg_spectral.as_symmetric(block))
            logging.vlog(1, f"Pixel {m}: closed form failed ({e}), bisection")

    if fallback_blocks:
        beta[fallback] = _bisect(_shifted(vd, delta), np.stack(fallback_blocks), d, BISECTION_TOL)
        capped[fallback] = beta[fallback] >= BETA_CAP
        logging.warning(
            f"{int(fallback.sum())} of {stack.m} pixels used the bisection fallback"
        )
    if np.any(capped):
        logging.warning(f"{int(capped.sum())} pixels hit the beta cap {BETA_CAP:g}")

    logging.info(
        f"Beta map: M={stack.m}, delta={delta:.3e}, d={d}, max beta {beta.max():.4g}"
    )
    return BetaMap(
        beta=beta,
        alpha0=alpha0,
        fallback=fallback,
        capped=capped,
        delta=float(delta),
        d=int(d),
        centroids=centroids,
    )


def negative_count_field(vd, stack: SensitivityStack, alpha: float, delta: float) -> np.ndarray:
    """count_negative(V^delta - alpha S_m + delta I, 0) for every pixel."""
    vd = linalg_spectral.as_symmetric(vd)
    check_dimensions(vd, stack)
    w = linalg_spectral.eigvalsh_desc(_shifted(vd, delta) - alpha * stack.matrices)
    return np.sum(w < 0.0, axis=-1).astype(int)
