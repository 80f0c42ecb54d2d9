"""Gaussian observation types, KL divergences, and the phase-space covariance
algebra behind the multi-pulse entangled transmitter.

Conventions used throughout: hbar = 1/2, so a vacuum mode has quadrature
covariance I/4 and shot-noise-limited homodyne detection of a coherent state
yields variance 1/4. Phase-space vectors interleave quadratures per mode as
(q1, p1, q2, p2, ...), and the real splitter matrices act block-wise on those
(q, p) pairs.

All types are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, ResourceError, UsageError

VACUUM_VARIANCE = 0.25

# Symmetry slack accepted when validating covariance matrices.
SYMMETRY_TOL = 1e-12
# A factorization that fails on the raw matrix is retried once with this
# diagonal jitter; covariances here are analytically positive definite, so
# anything further out is treated as a bug in the caller.
PD_JITTER = 1e-10

# Caps the splitter recursion (2**k modes) and the entangled block length.
MAX_SPLITTER_ORDER = 10
MAX_BLOCK_MODES = 1024


def _as_locked_array(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype)
    a.setflags(write=False)
    return a


def _validated_cov(cov: np.ndarray, what: str) -> np.ndarray:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise UsageError(f"{what} must be a square matrix, got shape {cov.shape}")
    asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
    if asym > SYMMETRY_TOL:
        raise DomainError(f"{what} is not symmetric (max asymmetry {asym:.3e})")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            np.linalg.cholesky(cov + PD_JITTER * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            raise DomainError(f"{what} is not positive definite") from None
    return cov


@dataclass(frozen=True)
class Gaussian1D:
    """Univariate Gaussian in quadrature units."""

    mean: float
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        if not self.variance > 0.0:
            raise DomainError(f"variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class GaussianVec:
    """n-variate Gaussian with symmetric positive-definite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_locked_array(np.atleast_1d(self.mean))
        cov = _as_locked_array(np.atleast_2d(self.cov))
        _validated_cov(cov, "covariance")
        if mean.ndim != 1 or mean.shape[0] != cov.shape[0]:
            raise UsageError(
                f"mean length {mean.shape} does not match covariance {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class PhaseSpaceState:
    """Gaussian state of n modes: mean and covariance over (q1, p1, ..., qn, pn)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _as_locked_array(np.atleast_1d(self.mean))
        cov = _as_locked_array(np.atleast_2d(self.cov))
        _validated_cov(cov, "phase-space covariance")
        if mean.shape[0] != cov.shape[0]:
            raise UsageError("mean and covariance dimensions disagree")
        if mean.shape[0] % 2 != 0:
            raise UsageError("phase-space dimension must be even (q,p per mode)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.mean.shape[0] // 2


def kl_gaussian_1d(p2: Gaussian1D, p1: Gaussian1D) -> float:
    """KL divergence S(p2 || p1) in nats between univariate Gaussians."""
    ratio = p2.variance / p1.variance
    return 0.5 * (ratio - np.log(ratio) - 1.0) + (p2.mean - p1.mean) ** 2 / (
        2.0 * p1.variance
    )


def kl_gaussian_nd(p2: GaussianVec, p1: GaussianVec) -> float:
    """KL divergence S(p2 || p1) in nats between n-variate Gaussians.

    Uses Cholesky factorizations for the log-determinants and solves, which
    stays accurate for the block sizes used here (up to a few hundred).
    """
    if p2.dim != p1.dim:
        raise UsageError(f"dimension mismatch: {p2.dim} vs {p1.dim}")
    n = p1.dim
    try:
        l1 = np.linalg.cholesky(p1.cov)
    except np.linalg.LinAlgError:
        raise DomainError("reference covariance is singular") from None
    l2 = np.linalg.cholesky(p2.cov)
    logdet_ratio = 2.0 * (
        np.sum(np.log(np.diag(l2))) - np.sum(np.log(np.diag(l1)))
    )
    c = solve_triangular(l1, l2, lower=True)
    trace_term = float(np.sum(c * c))
    y = solve_triangular(l1, p2.mean - p1.mean, lower=True)
    return 0.5 * (trace_term - logdet_ratio - n) + 0.5 * float(y @ y)


def hadamard_real_form(k: int, max_order: int = MAX_SPLITTER_ORDER) -> np.ndarray:
    """Real form of the 2**k-mode equal splitter as a 2**(k+1) square matrix.

    Built by the block recursion H_1 = I_2,
    H_{2^k} = [[H, H], [H, -H]] / sqrt(2); orthogonal by construction and
    acting block-wise on interleaved (q, p) pairs.
    """
    if k < 0 or int(k) != k:
        raise UsageError(f"splitter order must be a nonnegative integer, got {k}")
    if k > max_order:
        raise ResourceError(f"splitter order {k} exceeds configured max {max_order}")
    h = np.eye(2)
    for _ in range(int(k)):
        h = np.block([[h, h], [h, -h]]) / np.sqrt(2.0)
    return h


def entangled_block_cov_closed(n: int, r: float) -> np.ndarray:
    """Closed-form 2n x 2n covariance of one squeezed pulse spread over an
    n-mode equal splitter.

    Entries: (e^{-2r}+n-1)/(4n) on q diagonals, (e^{2r}+n-1)/(4n) on p
    diagonals, (e^{-2r}-1)/(4n) between distinct q's, (e^{2r}-1)/(4n) between
    distinct p's, zero on every q-p cross term. Valid for any n >= 1 (any
    equal-power n-splitter produces it).
    """
    if n < 1 or int(n) != n:
        raise UsageError(f"block length must be a positive integer, got {n}")
    n = int(n)
    em, ep = np.exp(-2.0 * r), np.exp(2.0 * r)
    cov = np.zeros((2 * n, 2 * n))
    q = slice(0, 2 * n, 2)
    p = slice(1, 2 * n, 2)
    cov[q, q] = (em - 1.0) / (4.0 * n)
    cov[p, p] = (ep - 1.0) / (4.0 * n)
    idx = np.arange(2 * n)
    cov[idx[0::2], idx[0::2]] = (em + n - 1.0) / (4.0 * n)
    cov[idx[1::2], idx[1::2]] = (ep + n - 1.0) / (4.0 * n)
    return cov


def entangled_block_cov_oracle(n: int, r: float) -> np.ndarray:
    """Brute-force covariance: explicit splitter conjugation of one squeezed
    mode stacked with n-1 vacua.

    Only defined for n a power of two, where the block-recursive splitter
    exists; serves as the independent check of the closed form.
    """
    if n < 1 or int(n) != n or (int(n) & (int(n) - 1)) != 0:
        raise UsageError(f"oracle requires a power-of-two block length, got {n}")
    n = int(n)
    k = n.bit_length() - 1
    seed = np.full(2 * n, VACUUM_VARIANCE)
    seed[0] = np.exp(-2.0 * r) / 4.0
    seed[1] = np.exp(2.0 * r) / 4.0
    h = hadamard_real_form(k)
    return h @ np.diag(seed) @ h.T


def apply_loss(state: PhaseSpaceState, eta: float) -> PhaseSpaceState:
    """Pure-loss channel of transmissivity eta on every mode.

    Means scale by sqrt(eta); covariance maps to eta*V + (1-eta)/4 * I.
    """
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1], got {eta}")
    dim = state.mean.shape[0]
    cov = eta * state.cov + ((1.0 - eta) * VACUUM_VARIANCE) * np.eye(dim)
    return PhaseSpaceState(np.sqrt(eta) * state.mean, cov)


def homodyne_marginal(state: PhaseSpaceState) -> GaussianVec:
    """Distribution of simultaneous q-quadrature homodyne outputs: the q
    sub-vector of the mean and the q-row/column block of the covariance."""
    q = np.arange(0, 2 * state.n_modes, 2)
    return GaussianVec(state.mean[q], state.cov[np.ix_(q, q)])
