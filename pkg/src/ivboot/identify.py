"""Identification machinery: closed-form and minimum-norm solutions of the
moment system, rank/completeness classification, instrument-strength
classification, and the basis-truncation bias tail."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

RANK_RTOL = 1e-8  # singular value counted iff > RANK_RTOL * sigma_max


class IdentificationError(ValueError):
    """The moment system does not identify a unique solution."""


class InfeasibleSystemError(ValueError):
    """Rank-deficient constraints with inconsistent right-hand side."""


@dataclass(frozen=True)
class MomentSystem:
    """Population moment constraints eta_star @ x = rhs.

    ``eta_star`` is (K, J); row k collects E W^k psi_j(X).  ``rhs`` holds
    E W^k Y - delta_k.  ``c_ident`` optionally records the norm constant of
    the ball on which the solution is unique.
    """

    eta_star: np.ndarray
    rhs: np.ndarray
    c_ident: Optional[float] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.eta_star, dtype=float))
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        if A.ndim != 2 or A.shape[0] != b.size:
            raise ValueError(f"eta_star {A.shape} incompatible with rhs {b.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("moment system entries must be finite")
        object.__setattr__(self, "eta_star", A)
        object.__setattr__(self, "rhs", b)


@dataclass(frozen=True)
class StrengthReport:
    """Largest-eigenvalue growth curve and its fitted log-log exponent."""

    lambda_max_curve: tuple
    exponent: float
    label: str


@dataclass(frozen=True)
class RankReport:
    rank: int
    label: str  # "complete" or "incomplete"


def single_iv_solution(eta1, ewy: float) -> np.ndarray:
    """Unique solution of the single-instrument system: (ewy/||eta1||^2) eta1."""
    eta1 = np.asarray(eta1, dtype=float)
    nrm2 = float(eta1 @ eta1)
    if nrm2 <= 0.0:
        raise IdentificationError("eta1 is zero: the single-instrument system has no unique solution")
    return (float(ewy) / nrm2) * eta1


def min_norm_solution(system: MomentSystem) -> np.ndarray:
    """Minimum-Euclidean-norm x with eta_star @ x = rhs.

    Uses a rank-revealing SVD of the constraint matrix rather than forming
    (A A^T)^{-1} explicitly.  Consistent redundant rows are dropped with a
    warning; inconsistent rank-deficient systems raise
    InfeasibleSystemError.
    """
    A = system.eta_star
    b = system.rhs
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > RANK_RTOL * (s[0] if s.size else 0.0)
    rank = int(keep.sum())
    if rank == 0:
        if np.allclose(b, 0.0):
            return np.zeros(A.shape[1])
        raise InfeasibleSystemError("zero constraint matrix with nonzero rhs")
    if rank < A.shape[0]:
        # x built from the retained singular directions; check it still
        # satisfies the dropped (dependent) constraints
        x = Vt[keep].T @ ((U[:, keep].T @ b) / s[keep])
        resid = A @ x - b
        if np.linalg.norm(resid) > 1e-8 * (1.0 + np.linalg.norm(b)):
            raise InfeasibleSystemError(
                f"constraints have rank {rank} < {A.shape[0]} and inconsistent rhs "
                f"(residual {np.linalg.norm(resid):.3e})"
            )
        warnings.warn(f"dropped {A.shape[0] - rank} redundant constraint row(s)")
        return x
    x = Vt.T @ ((U.T @ b) / s)
    resid = np.linalg.norm(A @ x - b)
    if resid > 1e-10 * (1.0 + np.linalg.norm(b)):
        raise InfeasibleSystemError(f"solution residual {resid:.3e} too large")
    return x


def rank_classify(eta_star_per_obs, j_max: Optional[int] = None) -> RankReport:
    """Numerical rank of the accumulated moment matrix sum_{i,k} eta eta^T.

    The model is complete when the rank reaches the basis dimension (j_max
    defaults to the trailing axis length).
    """
    arr = np.asarray(eta_star_per_obs, dtype=float)
    if arr.ndim != 3:
        raise ValueError(f"expected (n, K, J) array, got shape {arr.shape}")
    J = arr.shape[2]
    if j_max is None:
        j_max = J
    flat = arr.reshape(-1, J)
    gram = flat.T @ flat
    vals = np.linalg.eigvalsh(gram)
    top = vals[-1] if vals.size else 0.0
    rank = int(np.sum(vals > RANK_RTOL * max(top, 0.0))) if top > 0 else 0
    label = "complete" if rank >= min(J, j_max) else "incomplete"
    return RankReport(rank=rank, label=label)


def strength_classify(moment_matrices: Sequence[np.ndarray], sizes: Sequence[int],
                      weak_below: float = 0.2, strong_above: float = 0.8) -> StrengthReport:
    """Classify instrument strength from the eigenvalue growth of the
    accumulated moment matrices.

    ``moment_matrices[k]`` is the (J, J) moment matrix accumulated over the
    first ``sizes[k]`` observations.  The exponent is the least-squares
    slope of log lambda_max against log size; class bands at
    ``weak_below`` / ``strong_above`` are an artifact convention.
    """
    sizes = np.asarray(sizes, dtype=float)
    if sizes.size < 3:
        raise ValueError(f"need at least 3 sizes, got {sizes.size}")
    if np.any(np.diff(sizes) <= 0):
        raise ValueError("sizes must be strictly increasing")
    if len(moment_matrices) != sizes.size:
        raise ValueError("one moment matrix per size required")
    s = np.array([np.linalg.eigvalsh(np.atleast_2d(np.asarray(M, dtype=float)))[-1]
                  for M in moment_matrices])
    if np.any(s <= 0):
        raise ValueError("largest eigenvalues must be positive for a log-log fit")
    exponent = float(np.polyfit(np.log(sizes), np.log(s), 1)[0])
    if exponent < weak_below:
        label = "weak"
    elif exponent > strong_above:
        label = "strong"
    else:
        label = "semi_strong"
    return StrengthReport(lambda_max_curve=tuple(zip(sizes.tolist(), s.tolist())),
                          exponent=exponent, label=label)


def nonparam_bias_tail(coeffs, n_basis: int) -> float:
    """Euclidean norm of the coefficient tail beyond the first n_basis terms."""
    theta = np.asarray(coeffs, dtype=float)
    if theta.ndim != 1:
        raise ValueError("coeffs must be a vector")
    if n_basis > theta.size:
        raise ValueError(f"n_basis={n_basis} exceeds coefficient sequence length {theta.size}")
    return float(np.linalg.norm(theta[n_basis:]))
