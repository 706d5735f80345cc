"""Synthetic covariate-shift ensembles with diagonal covariances.

Training rows follow x = Sigma_p^{1/2} z and test rows x = Sigma_q^{1/2} z,
where the z-design comes from a scaled QR factor so that X X^T has spectrum
n * sigma exactly. Targets are sin(|x|^2) plus Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DataError

_MASK64 = (1 << 64) - 1


def mix64(master_seed: int, index: int) -> int:
    """Splittable child seed: splitmix64 finalizer over (master, index)."""
    z = (int(master_seed) & _MASK64) ^ ((int(index) * 0x9E3779B97F4A7C15) & _MASK64)
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class CovariancePair:
    sigma_p: np.ndarray
    sigma_q: np.ndarray
    decay_exponent: float = 0.0

    def __post_init__(self):
        sp = np.asarray(self.sigma_p, dtype=float)
        sq = np.asarray(self.sigma_q, dtype=float)
        if sp.ndim != 1 or sp.shape != sq.shape:
            raise DataError("sigma_p and sigma_q must be vectors of equal length")
        if np.any(sp <= 0) or np.any(sq <= 0) or not (np.all(np.isfinite(sp)) and np.all(np.isfinite(sq))):
            raise DataError("covariance diagonals must be strictly positive and finite")
        object.__setattr__(self, "sigma_p", sp)
        object.__setattr__(self, "sigma_q", sq)

    @property
    def d(self) -> int:
        return self.sigma_p.size


@dataclass(frozen=True)
class DataEnsemble:
    X_train: np.ndarray
    X_test: np.ndarray
    y_train: np.ndarray
    f_rho_train: np.ndarray
    f_rho_test: np.ndarray
    noise_sd: float
    covariances: CovariancePair
    master_seed: int

    @property
    def n(self) -> int:
        return self.X_train.shape[0]

    @property
    def d(self) -> int:
        return self.X_train.shape[1]


class WeightMode(str, Enum):
    UNWEIGHTED = "unweighted"
    TRUE_RATIO = "true_ratio"
    TRUNCATED_RATIO = "truncated_ratio"
    CUSTOM = "custom"


@dataclass(frozen=True)
class WeightingScheme:
    mode: WeightMode = WeightMode.TRUNCATED_RATIO
    cap: float = 10.0
    custom: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", WeightMode(self.mode))
        if self.mode is WeightMode.TRUNCATED_RATIO and not self.cap > 0:
            raise ConfigurationError(f"truncation cap must be positive, got {self.cap}")
        if self.mode is WeightMode.CUSTOM and self.custom is None:
            raise ConfigurationError("custom weighting needs a weight vector")


def make_covariance(d: int, a: float, normalize: bool = True) -> np.ndarray:
    """Diagonal entries proportional to i^{-a}; mean 1 when normalized."""
    if d < 1 or a < 0:
        raise ConfigurationError(f"need d >= 1 and a >= 0, got d={d}, a={a}")
    s = np.arange(1, d + 1, dtype=float) ** (-float(a))
    if normalize:
        s *= d / s.sum()
    return s


def perturb_covariance(sigma_p, rng) -> np.ndarray:
    """Test covariance with 1/sigma_q = 1/sigma_p + eps', eps' ~ U[0, 1] per coordinate."""
    sp = np.asarray(sigma_p, dtype=float)
    if np.any(sp <= 0):
        raise DataError("sigma_p must be strictly positive")
    eps = rng.uniform(0.0, 1.0, size=sp.size)
    return 1.0 / (1.0 / sp + eps)


def _orthonormal_columns(G: np.ndarray) -> Optional[np.ndarray]:
    Q, R = np.linalg.qr(G, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() <= 1e-12 * max(diag.max(), 1.0):
        return None
    return Q


def sample_design(rng, n: int, sigma) -> np.ndarray:
    """n x d design with rows Sigma^{1/2} z built from a scaled orthogonal factor.

    n >= d: Z = sqrt(n) Q with orthonormal columns, so Z^T Z = n I.
    n < d: Z = sqrt(d) Q^T with orthonormal rows, so every row has squared norm d.
    """
    sigma = np.asarray(sigma, dtype=float)
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    d = sigma.size
    for _ in range(2):
        if n >= d:
            Q = _orthonormal_columns(rng.standard_normal((n, d)))
            if Q is not None:
                Z = np.sqrt(n) * Q
                break
        else:
            Q = _orthonormal_columns(rng.standard_normal((d, n)))
            if Q is not None:
                Z = np.sqrt(d) * Q.T
                break
    else:
        raise DataError("rank-deficient Gaussian draw twice in a row")
    return Z * np.sqrt(sigma)[None, :]


def sample_iid_design(rng, n: int, sigma) -> np.ndarray:
    """n x d design with rows Sigma^{1/2} z, z standard Gaussian.

    Unlike the QR design this keeps off-diagonal inner products random at n = d
    and flat sigma, where the QR rows would be exactly orthogonal.
    """
    sigma = np.asarray(sigma, dtype=float)
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    return rng.standard_normal((n, sigma.size)) * np.sqrt(sigma)[None, :]


def target(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.sin(np.einsum("ij,ij->i", X, X))


def gen_dataset(d: int, n_train: int, n_test: int, a: float, sigma_eps: float, seed: int,
                normalize: bool = True, cov_seed: Optional[int] = None,
                perturb: bool = True) -> DataEnsemble:
    """Deterministic ensemble.

    ``cov_seed`` (default ``seed``) drives the Sigma_q perturbation and the test
    design, ``seed`` the training design and the noise, so several training sizes
    can share one covariance pair and one test set. ``perturb=False`` gives
    Sigma_q = Sigma_p.
    """
    if min(d, n_train, n_test) < 1:
        raise ConfigurationError("d, n_train and n_test must all be >= 1")
    if sigma_eps < 0:
        raise ConfigurationError(f"sigma_eps must be >= 0, got {sigma_eps}")
    cov_rng = np.random.default_rng(seed if cov_seed is None else cov_seed)
    sigma_p = make_covariance(d, a, normalize)
    sigma_q = perturb_covariance(sigma_p, cov_rng) if perturb else sigma_p.copy()
    pair = CovariancePair(sigma_p, sigma_q, float(a))
    X_test = sample_design(cov_rng, n_test, sigma_q)

    rng = np.random.default_rng(seed)
    X_train = sample_design(rng, n_train, sigma_p)
    f_train = target(X_train)
    f_test = target(X_test)
    noise = rng.standard_normal(n_train)
    y = f_train + sigma_eps * noise if sigma_eps > 0 else f_train.copy()
    return DataEnsemble(X_train, X_test, y, f_train, f_test, float(sigma_eps), pair, int(seed))


def log_density_ratio(pair: CovariancePair, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    sp, sq = pair.sigma_p, pair.sigma_q
    const = 0.5 * np.sum(np.log(sp) - np.log(sq))
    quad = X**2 @ (1.0 / sq - 1.0 / sp)
    return const - 0.5 * quad


def density_ratio(pair: CovariancePair, x):
    """Gaussian-model ratio dq/dp for a single point (vector) or rows of a matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(np.exp(log_density_ratio(pair, x[None, :])[0]))
    return np.exp(log_density_ratio(pair, x))


def weight_vector(scheme: WeightingScheme, pair: Optional[CovariancePair], X_train) -> np.ndarray:
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    n = X_train.shape[0]
    if scheme.mode is WeightMode.UNWEIGHTED:
        return np.ones(n)
    if scheme.mode is WeightMode.CUSTOM:
        w = np.asarray(scheme.custom, dtype=float)
        if w.shape != (n,):
            raise ConfigurationError(f"custom weights must have length {n}, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ConfigurationError("custom weights must be finite and strictly positive")
        return w.copy()
    if pair is None:
        raise ConfigurationError("ratio weighting needs the covariance pair")
    w = density_ratio(pair, X_train)
    if scheme.mode is WeightMode.TRUNCATED_RATIO:
        w = np.minimum(w, scheme.cap)
    # exp underflow would give zero weights, which the solver rejects
    return np.maximum(w, np.finfo(float).tiny)
