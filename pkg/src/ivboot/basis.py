"""Core domain types, the cosine design matrix, and reproducible RNG streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BASIS_KINDS = ("cosine",)


@dataclass(frozen=True)
class BasisSpec:
    """Number and family of basis functions used to expand the target."""

    n_basis: int
    kind: str = "cosine"

    def __post_init__(self):
        if self.n_basis < 1:
            raise ValueError(f"n_basis must be >= 1, got {self.n_basis}")
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; supported: {BASIS_KINDS}")


@dataclass(frozen=True)
class SampleTruth:
    """Structural parameters used to generate a synthetic sample."""

    beta_star: float
    pi_star: np.ndarray


@dataclass(frozen=True)
class IvSample:
    """One realized dataset of the two-equation benchmark model.

    ``z`` has shape (J, n): one row per instrument column of the design.
    ``omega`` is the 2x2 error covariance the test statistics assume known;
    the actual data-generating covariance may differ (misspecification runs).
    """

    y1: np.ndarray
    y2: np.ndarray
    z: np.ndarray
    omega: np.ndarray
    truth: Optional[SampleTruth] = None

    def __post_init__(self):
        y1 = np.asarray(self.y1, dtype=float)
        y2 = np.asarray(self.y2, dtype=float)
        z = np.asarray(self.z, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        if y1.ndim != 1 or y2.ndim != 1 or y1.shape != y2.shape:
            raise ValueError(f"y1, y2 must be equal-length vectors, got {y1.shape}, {y2.shape}")
        if y1.size < 1:
            raise ValueError("empty sample")
        if z.ndim != 2 or z.shape[1] != y1.size:
            raise ValueError(f"z must be (J, n={y1.size}), got {z.shape}")
        if omega.shape != (2, 2) or not np.allclose(omega, omega.T):
            raise ValueError("omega must be symmetric 2x2")
        if np.linalg.eigvalsh(omega).min() <= 0:
            raise ValueError("omega must be positive definite")
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "omega", omega)

    @property
    def n_obs(self) -> int:
        return self.y1.size

    @property
    def n_instruments(self) -> int:
        return self.z.shape[0]


@dataclass(frozen=True)
class GeneralDesign:
    """Instrument-weighted design of the penalized quasi log-likelihood.

    ``eta`` has shape (K, n, J): eta[k, i] is the regressor vector of
    observation i under instrument k.  ``zk`` has shape (K, n) and already
    carries the bias correction (responses minus delta_k).  ``penalty`` is
    the ridge weight on ||theta||^2 / 2.
    """

    eta: np.ndarray
    zk: np.ndarray
    penalty: float = 0.0

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        zk = np.asarray(self.zk, dtype=float)
        if eta.ndim != 3:
            raise ValueError(f"eta must be (K, n, J), got shape {eta.shape}")
        if zk.shape != eta.shape[:2]:
            raise ValueError(f"zk shape {zk.shape} does not match eta {eta.shape[:2]}")
        if self.penalty < 0:
            raise ValueError(f"penalty must be >= 0, got {self.penalty}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "zk", zk)

    @property
    def n_instruments(self) -> int:
        return self.eta.shape[0]

    @property
    def n_obs(self) -> int:
        return self.eta.shape[1]

    @property
    def dim(self) -> int:
        return self.eta.shape[2]


@dataclass(frozen=True)
class RngStream:
    """Counter-addressed random stream.

    Two streams with equal (master_seed, stream_id) produce bit-identical
    draw sequences, independent of thread count or scheduling.  Units of
    parallel work must each own their stream; streams are never shared.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(seq)

    def substream(self, offset: int) -> "RngStream":
        """Derived stream; callers keep offsets disjoint across uses."""
        return RngStream(self.master_seed, self.stream_id + offset)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream or a ready numpy Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def cosine_design(n: int, n_basis: int) -> np.ndarray:
    """Cosine instrument matrix with entries cos(2*pi*i*j/n), shape (J, n).

    Rows are indexed j = 1..J, columns i = 1..n; there is no constant row.
    For n_basis < n/2 the rows are exactly orthogonal with squared norm n/2.
    """
    if n < 1 or n_basis < 1:
        raise ValueError(f"need n >= 1 and n_basis >= 1, got n={n}, n_basis={n_basis}")
    i = np.arange(1, n + 1)
    j = np.arange(1, n_basis + 1)
    return np.cos(2.0 * np.pi * np.outer(j, i) / n)


def build_general_design(instruments, basis_values, responses, delta=None,
                         penalty: float = 0.0) -> GeneralDesign:
    """Assemble a GeneralDesign from per-observation pieces.

    Parameters
    ----------
    instruments : (K, n) array
        Observed instrument values W^k_i.
    basis_values : (J, n) array
        Basis evaluations psi_j(X_i).
    responses : (n,) array
        Outcomes Y_i.
    delta : (K,) array, optional
        Bias terms subtracted from the instrument-weighted responses;
        defaults to zero (the parametric case).
    penalty : float
        Ridge weight, >= 0.
    """
    W = np.atleast_2d(np.asarray(instruments, dtype=float))
    psi = np.asarray(basis_values, dtype=float)
    y = np.asarray(responses, dtype=float)
    K, n = W.shape
    if psi.ndim != 2 or psi.shape[1] != n:
        raise ValueError(f"basis_values must be (J, {n}), got {psi.shape}")
    if y.shape != (n,):
        raise ValueError(f"responses must be ({n},), got {y.shape}")
    if delta is None:
        delta = np.zeros(K)
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (K,):
        raise ValueError(f"delta must be ({K},), got {delta.shape}")
    eta = W[:, :, None] * psi.T[None, :, :]
    zk = W * y[None, :] - delta[:, None]
    return GeneralDesign(eta=eta, zk=zk, penalty=penalty)
