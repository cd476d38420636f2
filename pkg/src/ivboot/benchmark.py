"""Benchmark test statistics for the two-equation model: the S/T sufficient
statistics, the likelihood-ratio statistic with conditional (CLR) critical
values, Lagrange-multiplier and Anderson-Rubin statistics, and the profile
likelihood that realizes the LR/BLR tests on the structural hypothesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import IvSample, as_generator
from .bootstrap import RetryDrawError

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class STPair:
    """Sufficient-statistic vectors for a hypothesized beta0."""

    s: np.ndarray
    t: np.ndarray
    beta0: float


@dataclass(frozen=True)
class ProfileFit:
    """Profiled likelihood value and the implied coefficient vector."""

    value: float
    pi_hat: np.ndarray


def _sym_inv_sqrt(M: np.ndarray, label: str) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    if vals[0] <= 0:
        raise ValueError(f"{label} must be positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def st_vectors(sample: IvSample, beta0: float) -> STPair:
    """S and T vectors at beta0, with the symmetric square root of the
    instrument Gram matrix and the assumed-known omega."""
    z = sample.z
    gram = z @ z.T
    gram_inv_sqrt = _sym_inv_sqrt(gram, "instrument Gram matrix Z Z'")
    omega = sample.omega
    a = np.array([beta0, 1.0])
    b = np.array([1.0, -beta0])
    yb = sample.y1 - beta0 * sample.y2
    ya = beta0 * sample.y1 + sample.y2
    s = gram_inv_sqrt @ (z @ yb) / np.sqrt(b @ omega @ b)
    t = gram_inv_sqrt @ (z @ ya) / np.sqrt(a @ np.linalg.solve(omega, a))
    return STPair(s=s, t=t, beta0=float(beta0))


def t_clr(pair: STPair) -> float:
    """S'S - T'T + sqrt((S'S - T'T)^2 + 4 (S'T)^2), always >= 0."""
    ss = float(pair.s @ pair.s)
    tt = float(pair.t @ pair.t)
    st = float(pair.s @ pair.t)
    d = ss - tt
    return d + float(np.sqrt(d * d + 4.0 * st * st))


def t_lm(pair: STPair) -> float:
    """(S'T)^2 / T'T, compared against the chi-square(1) quantile."""
    tt = float(pair.t @ pair.t)
    if tt <= 0.0:
        raise ValueError("T'T = 0: the Lagrange-multiplier statistic is undefined")
    st = float(pair.s @ pair.t)
    return st * st / tt


def t_ar(pair: STPair, n_instruments: Optional[int] = None) -> float:
    """S'S / J, compared against the chi-square(J)/J quantile."""
    J = n_instruments if n_instruments is not None else pair.s.size
    return float(pair.s @ pair.s) / J


def clr_critical(t_norm2: float, n_instruments: int, alpha: float,
                 n_sims: int = 10000, rng=None) -> float:
    """Conditional critical value of t_clr given ||T||^2 = t_norm2.

    Simulates S as a standard J-dimensional Gaussian with T pinned at
    sqrt(t_norm2) * e1 (the statistic only depends on T through its norm)
    and returns the empirical (1-alpha) quantile.
    """
    if t_norm2 < 0:
        raise ValueError(f"t_norm2 must be >= 0, got {t_norm2}")
    if n_sims < 1000:
        raise ValueError(f"n_sims must be >= 1000, got {n_sims}")
    gen = as_generator(rng) if rng is not None else np.random.default_rng(0)
    S = gen.standard_normal((n_sims, n_instruments))
    ss = np.einsum("mj,mj->m", S, S)
    d = ss - t_norm2
    stats = d + np.sqrt(d * d + 4.0 * t_norm2 * S[:, 0] ** 2)
    if alpha >= 1.0:
        return float(stats.min())
    return float(np.quantile(stats, 1.0 - alpha))


def _profile_quadratics(sample: IvSample, weights: Optional[np.ndarray]):
    """2x2 matrix M and scalar pieces of the weighted profile likelihood.

    For fixed beta the nuisance coefficients solve a weighted GLS problem;
    profiling them out leaves
        value(beta) = -0.5 * (c_u - d' M d / d' Om^{-1} d),  d = (beta, 1),
    where M depends on the data, the weights, and omega only.
    """
    z = sample.z
    y = np.stack([sample.y1, sample.y2], axis=1)  # (n, 2)
    n = sample.n_obs
    u = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if u.shape != (n,):
        raise ValueError(f"weights must be ({n},), got {u.shape}")
    om_inv = np.linalg.inv(sample.omega)
    G_u = (z * u[None, :]) @ z.T  # (J, J)
    W = (z * u[None, :]) @ y @ om_inv  # (J, 2): columns pair with d
    C_u = float(np.einsum("ni,ij,nj,n->", y, om_inv, y, u))
    return G_u, W, C_u, om_inv


def _profile_value_terms(G_u, W, ridge: float = 0.0):
    """M = W' G_u^{-1} W (2x2), with a ridge fallback for singular G_u."""
    J = G_u.shape[0]
    M_try = G_u if ridge == 0.0 else G_u + ridge * np.eye(J)
    try:
        sol = np.linalg.solve(M_try, W)
    except np.linalg.LinAlgError:
        raise RetryDrawError("weighted instrument Gram matrix is singular") from None
    return W.T @ sol


def ams_profile_loglik(sample: IvSample, beta: float,
                       weights: Optional[np.ndarray] = None) -> ProfileFit:
    """Profile (optionally weighted) Gaussian log-likelihood at beta.

    The coefficient vector is the weighted-GLS solution for fixed beta; the
    returned value omits the constant normalization, so noiseless data give
    exactly zero.  A singular weighted Gram matrix falls back to a small
    ridge; all-zero weights yield value 0 and a zero coefficient vector.
    """
    G_u, W, C_u, om_inv = _profile_quadratics(sample, weights)
    d = np.array([beta, 1.0])
    vals = np.linalg.eigvalsh(G_u)
    if np.allclose(vals, 0.0):
        return ProfileFit(value=0.0, pi_hat=np.zeros(sample.n_instruments))
    if vals[0] < 0 and weights is not None:
        raise RetryDrawError("weighted instrument Gram matrix is indefinite")
    dd = float(d @ om_inv @ d)
    ridge = 0.0
    if vals[0] <= 1e-12 * max(vals[-1], 1.0):
        ridge = 1e-10 * float(np.trace(G_u))
    sol = np.linalg.solve(G_u + ridge * np.eye(G_u.shape[0]), W @ d)
    pi_hat = sol / dd
    M = _profile_value_terms(G_u, W, ridge)
    value = -0.5 * (C_u - float(d @ M @ d) / dd)
    return ProfileFit(value=value, pi_hat=pi_hat)


def _sup_profile_g(M: np.ndarray, om_inv: np.ndarray, beta_center: float):
    """Maximize g(beta) = d' M d / d' Om^{-1} d by a 64-point pre-scan and
    golden-section refinement on [beta_center - 10, beta_center + 10]."""
    def g(beta):
        d = np.array([beta, 1.0])
        return float(d @ M @ d) / float(d @ om_inv @ d)

    lo, hi = beta_center - 10.0, beta_center + 10.0
    grid = np.linspace(lo, hi, 64)
    vals = [g(b) for b in grid]
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, 63)]
    # golden-section to 1e-6
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = g(x1), g(x2)
    while b - a > 1e-6:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = g(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = g(x1)
    beta_max = 0.5 * (a + b)
    return beta_max, g(beta_max)


def profile_sup(sample: IvSample, weights: Optional[np.ndarray] = None,
                beta_center: float = 0.0):
    """Supremum over beta of the (weighted) profile likelihood.

    Returns (beta_max, sup_value).  The search window follows the grid
    pre-scan plus golden-section recipe around ``beta_center``.
    """
    G_u, W, C_u, om_inv = _profile_quadratics(sample, weights)
    vals = np.linalg.eigvalsh(G_u)
    if np.allclose(vals, 0.0):
        return beta_center, 0.0
    if vals[0] <= 0 and weights is not None:
        raise RetryDrawError("weighted instrument Gram matrix is not positive definite")
    M = _profile_value_terms(G_u, W)
    beta_max, gmax = _sup_profile_g(M, om_inv, beta_center)
    return beta_max, -0.5 * (C_u - gmax)


def ams_lr_statistic(sample: IvSample, beta0: float) -> float:
    """Likelihood-ratio statistic of H0: beta = beta0 on the t_clr scale.

    Evaluates 4 * [sup_beta profile - profile(beta0)]; for omega known this
    equals t_clr(st_vectors(sample, beta0)) exactly.  (The t_clr convention
    is twice the usual 2-log-likelihood-ratio, hence the factor 4 here
    rather than 2.)
    """
    bhat, sup_val = profile_sup(sample, None, beta_center=beta0)
    prof0 = ams_profile_loglik(sample, beta0).value
    return 4.0 * (sup_val - prof0)


def ams_blr_statistic(sample: IvSample, weights,
                      center: Optional[float] = None) -> float:
    """Bootstrap likelihood-ratio statistic on the t_clr scale.

    The restricted optimum fixes beta at the full-sample profile maximizer
    (the centered bootstrap hypothesis) while the nuisance coefficients stay
    free under the weighted objective.  Pass ``center`` to pin beta at some
    other value, e.g. the hypothesized beta0.
    """
    if center is None:
        center, _ = profile_sup(sample, None, beta_center=0.0)
    _, sup_w = profile_sup(sample, weights, beta_center=center)
    prof_c = ams_profile_loglik(sample, center, weights).value
    stat = 4.0 * (sup_w - prof_c)
    return stat
