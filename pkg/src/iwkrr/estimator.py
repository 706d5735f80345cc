"""Importance-weighted kernel ridge regression and its exact bias/variance split.

The weighted objective (1/n) sum_i w_i (f(x_i) - y_i)^2 + lam |f|_H^2 has dual
solution c = (K + lam n W^{-1})^{-1} y; predictions are K(x, X) c.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DataError, SingularSystemError
from .kernelcore import as_matrix

JITTER_SCALE = 1e-10


@dataclass(frozen=True)
class Factorization:
    """Cholesky (or symmetric indefinite) factor of K + lam n W^{-1}."""

    system: np.ndarray
    cho: Optional[tuple]
    jitter: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.cho is not None:
            return sla.cho_solve(self.cho, rhs, check_finite=False)
        return sla.solve(self.system, rhs, assume_a="sym", check_finite=False)


@dataclass(frozen=True)
class FittedEstimator:
    coefficients: np.ndarray
    lam: float
    weights: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]


@dataclass(frozen=True)
class BiasVarianceReport:
    bias_sq: float
    variance: float
    n_test: int
    jitter: float = 0.0

    @property
    def excess_risk(self) -> float:
        return self.bias_sq + self.variance


def _check_inputs(K, lam, weights):
    K = as_matrix(K)
    n = K.shape[0]
    if K.ndim != 2 or K.shape != (n, n):
        raise DataError(f"K must be square, got shape {K.shape}")
    if not lam >= 0:
        raise DataError(f"lambda must be >= 0, got {lam}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DataError(f"weights must have length {n}, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DataError("weights must be finite and strictly positive")
    return K, float(lam), w


def regularized_system(K, lam: float, weights) -> np.ndarray:
    K, lam, w = _check_inputs(K, lam, weights)
    A = K.copy()
    if lam > 0:
        A[np.diag_indices_from(A)] += lam * K.shape[0] / w
    return A


def factorize(K, lam: float, weights) -> Factorization:
    """Factor K + lam n W^{-1}.

    lam = 0 is the interpolation limit and must be numerically nonsingular.
    For lam > 0 a failed factorization is retried once with a diagonal jitter of
    1e-10 * trace(K) / n, which is reported back.
    """
    A = regularized_system(K, lam, weights)
    n = A.shape[0]
    try:
        return Factorization(A, sla.cho_factor(A, lower=True, check_finite=False), 0.0)
    except sla.LinAlgError:
        pass
    if lam == 0:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                sla.solve(A, np.ones(n), assume_a="sym")
            except (sla.LinAlgError, sla.LinAlgWarning) as exc:
                raise SingularSystemError(f"kernel matrix is numerically singular at lambda=0: {exc}") from exc
        return Factorization(A, None, 0.0)
    jitter = JITTER_SCALE * float(np.trace(as_matrix(K))) / n
    B = A.copy()
    B[np.diag_indices_from(B)] += jitter
    try:
        return Factorization(B, sla.cho_factor(B, lower=True, check_finite=False), jitter)
    except sla.LinAlgError:
        return Factorization(B, None, jitter)


def fit(K, targets, lam: float, weights) -> FittedEstimator:
    fac = factorize(K, lam, weights)
    y = np.asarray(targets, dtype=float)
    if y.shape != (fac.system.shape[0],):
        raise DataError(f"targets must have length {fac.system.shape[0]}, got shape {y.shape}")
    c = fac.solve(y)
    return FittedEstimator(c, float(lam), np.asarray(weights, dtype=float).copy(), fac.jitter)


def fit_noiseless(K, f_rho_train, lam: float, weights) -> FittedEstimator:
    return fit(K, f_rho_train, lam, weights)


def predict(est: FittedEstimator, cross) -> np.ndarray:
    cross = np.atleast_2d(np.asarray(cross, dtype=float))
    if cross.shape[1] != est.n:
        raise DataError(f"cross matrix has {cross.shape[1]} columns, estimator has n={est.n}")
    return cross @ est.coefficients


def decompose(K, cross_test, f_rho_train, f_rho_test, lam: float, weights,
              sigma_eps: float) -> BiasVarianceReport:
    """Exact conditional bias^2 and variance on the test rows under iid noise of sd sigma_eps."""
    if sigma_eps < 0:
        raise DataError(f"sigma_eps must be >= 0, got {sigma_eps}")
    C = np.atleast_2d(np.asarray(cross_test, dtype=float))
    f_test = np.asarray(f_rho_test, dtype=float)
    if C.shape[0] != f_test.shape[0]:
        raise DataError("cross_test rows and f_rho_test length differ")
    fac = factorize(K, lam, weights)
    if C.shape[1] != fac.system.shape[0]:
        raise DataError("cross_test columns do not match K")
    c = fac.solve(np.asarray(f_rho_train, dtype=float))
    resid = C @ c - f_test
    bias_sq = float(np.mean(resid**2))
    if sigma_eps == 0:
        variance = 0.0
    else:
        S = fac.solve(C.T)
        variance = float(sigma_eps**2 * np.sum(S * S) / C.shape[0])
    return BiasVarianceReport(bias_sq, variance, C.shape[0], fac.jitter)


def excess_risk_mc(K, cross_test, f_rho_train, f_rho_test, lam: float, weights,
                   sigma_eps: float, n_draws: int, rng, full: bool = False):
    """Monte-Carlo mean test MSE over fresh noise draws.

    Returns the mean, or ``(mean, standard_error)`` when ``full`` is set.
    """
    if n_draws < 1:
        raise DataError(f"n_draws must be >= 1, got {n_draws}")
    C = np.atleast_2d(np.asarray(cross_test, dtype=float))
    f_train = np.asarray(f_rho_train, dtype=float)
    f_test = np.asarray(f_rho_test, dtype=float)
    fac = factorize(K, lam, weights)
    noise = rng.standard_normal((f_train.size, n_draws))
    Y = f_train[:, None] + sigma_eps * noise
    preds = C @ fac.solve(Y)
    per_draw = np.mean((preds - f_test[:, None]) ** 2, axis=0)
    mean = float(per_draw.mean())
    if not full:
        return mean
    se = float(per_draw.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else float("inf")
    return mean, se


def training_residual(K, est: FittedEstimator, targets) -> float:
    """||(K + lam n W^{-1}) c - y|| for an already fitted estimator."""
    A = regularized_system(K, est.lam, est.weights)
    return float(np.linalg.norm(A @ est.coefficients - np.asarray(targets, dtype=float)))
