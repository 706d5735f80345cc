"""Kernels of the form h(<x,x'>/d) and h(-|x-x'|^2/d) and their high-dimensional
linearized surrogates.

The surrogate replaces the Gram matrix by

    K_lin = alpha * 11^T + beta * X X^T / d + gamma * I + T

with scalar coefficients fixed by the profile ``h`` and the training covariance.
``gamma`` is the curvature-induced implicit ridge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConfigurationError, DataError, ModelError

# Above this size spectral norms use Lanczos iteration instead of a full eigensolve.
EIGH_MAX_N = 2048
POWER_TOL = 1e-6
POWER_MAX_ITER = 500


class Family(str, Enum):
    INNER_PRODUCT = "inner_product"
    RADIAL = "radial"


class CrossForm(str, Enum):
    """Constant term used by the cross-kernel surrogate.

    TAYLOR keeps the constant of the second-order expansion (h(0) for inner
    product kernels, +h(-(tau_p+tau_q)) for radial ones). TABLE reproduces the
    tabulated closed form literally (no constant / -h(-(tau_p+tau_q))).
    """

    TAYLOR = "taylor"
    TABLE = "table"


_BUILTIN = ("polynomial", "exponential", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    profile: str
    degree: int = 5
    h: Optional[Callable] = None
    h1: Optional[Callable] = None
    h2: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.profile not in _BUILTIN + ("custom",):
            raise ConfigurationError(f"unknown kernel profile {self.profile!r}")
        if self.profile == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigurationError(f"polynomial degree must be a positive integer, got {self.degree!r}")
        if self.profile == "custom":
            missing = [name for name in ("h", "h1", "h2") if getattr(self, name) is None]
            if missing:
                raise ConfigurationError(f"custom profile is missing {', '.join(missing)}")

    @classmethod
    def polynomial(cls, degree: int = 5, family: Family = Family.INNER_PRODUCT) -> "KernelSpec":
        return cls(family, "polynomial", degree=degree)

    @classmethod
    def exponential(cls, family: Family = Family.INNER_PRODUCT) -> "KernelSpec":
        return cls(family, "exponential")

    @classmethod
    def gaussian(cls, family: Family = Family.RADIAL) -> "KernelSpec":
        return cls(family, "gaussian")

    @classmethod
    def custom(cls, h, h1, h2, family: Family = Family.INNER_PRODUCT) -> "KernelSpec":
        return cls(family, "custom", h=h, h1=h1, h2=h2)

    def describe(self) -> str:
        if self.profile == "polynomial":
            return f"{self.family.value}/polynomial(k={self.degree})"
        return f"{self.family.value}/{self.profile}"


def eval_profile(spec: KernelSpec, u):
    """Return ``(h(u), h'(u), h''(u))``; works elementwise on arrays."""
    u = np.asarray(u, dtype=float) if not np.isscalar(u) else float(u)
    if spec.profile == "polynomial":
        k = int(spec.degree)
        base = 1.0 + u
        h = base**k
        h1 = k * base ** (k - 1)
        h2 = k * (k - 1) * base ** (k - 2) if k >= 2 else 0.0 * base
        return h, h1, h2
    if spec.profile == "exponential":
        e = np.exp(2.0 * u)
        return e, 2.0 * e, 4.0 * e
    if spec.profile == "gaussian":
        e = np.exp(u)
        return e, e, e
    if spec.h is None or spec.h1 is None or spec.h2 is None:
        raise ConfigurationError("custom profile needs h, h' and h''")
    return spec.h(u), spec.h1(u), spec.h2(u)


def _h(spec: KernelSpec, u):
    if spec.profile == "polynomial":
        return (1.0 + u) ** int(spec.degree)
    if spec.profile == "exponential":
        return np.exp(2.0 * u)
    if spec.profile == "gaussian":
        return np.exp(u)
    return spec.h(u)


def profile_admissible(spec: KernelSpec, radius: float = 0.5, num: int = 201,
                       h2_bound: float = 1e6) -> bool:
    """Grid check of h >= 0, h' > 0, 0 < h'' <= h2_bound on [-radius, radius]."""
    u = np.linspace(-radius, radius, num)
    h, h1, h2 = (np.broadcast_to(np.asarray(v, dtype=float), u.shape) for v in eval_profile(spec, u))
    return bool(np.all(h >= 0) and np.all(h1 > 0) and np.all(h2 > 0) and np.all(h2 <= h2_bound))


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def kappa(self) -> float:
        return float(np.max(np.diag(self.entries)))

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def as_matrix(K) -> np.ndarray:
    if isinstance(K, GramMatrix):
        return K.entries
    return np.asarray(K, dtype=float)


def _check_design(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"{name} must be a nonempty 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} has non-finite entries")
    return X


def _sq_dist(A: np.ndarray, B: np.ndarray, inner: np.ndarray) -> np.ndarray:
    sa = np.einsum("ij,ij->i", A, A)
    sb = np.einsum("ij,ij->i", B, B)
    D = sa[:, None] + sb[None, :] - 2.0 * inner
    return np.maximum(D, 0.0)


def gram(spec: KernelSpec, X) -> GramMatrix:
    X = _check_design(X)
    d = X.shape[1]
    inner = X @ X.T
    if spec.family is Family.INNER_PRODUCT:
        K = _h(spec, inner / d)
    else:
        D = _sq_dist(X, X, inner)
        np.fill_diagonal(D, 0.0)
        K = _h(spec, -D / d)
    K = 0.5 * (K + K.T)
    return GramMatrix(np.ascontiguousarray(K))


def cross_gram(spec: KernelSpec, X_train, X_test) -> np.ndarray:
    """m x n matrix with entry (j, i) = K(x_test_j, x_train_i)."""
    X_train = _check_design(X_train, "X_train")
    X_test = _check_design(X_test, "X_test")
    if X_train.shape[1] != X_test.shape[1]:
        raise DataError(f"dimension mismatch: train d={X_train.shape[1]}, test d={X_test.shape[1]}")
    d = X_train.shape[1]
    inner = X_test @ X_train.T
    if spec.family is Family.INNER_PRODUCT:
        return _h(spec, inner / d)
    return _h(spec, -_sq_dist(X_test, X_train, inner) / d)


@dataclass(frozen=True)
class LinearizedParams:
    alpha: float
    beta: float
    gamma: float
    tau: float
    trace_sigma_sq_over_d2: float
    family: Family
    # h' and h'' at the expansion point -2*tau; only the radial T_p term uses them
    h1_center: float = 0.0
    h2_center: float = 0.0


@dataclass(frozen=True)
class CrossLinearizedParams:
    beta_pq: float
    tau_p: float
    tau_q: float
    family: Family
    offset: float = 0.0
    form: CrossForm = CrossForm.TAYLOR


def linearize_params(spec: KernelSpec, sigma_p_diag, strict: bool = True) -> LinearizedParams:
    """Coefficients of the linearized Gram matrix for training covariance diag(sigma_p_diag).

    With ``strict`` a nonpositive ``gamma`` (no curvature, e.g. affine h) raises
    ModelError; diagnostics pass ``strict=False``.
    """
    s = np.asarray(sigma_p_diag, dtype=float)
    if s.ndim != 1 or s.size == 0 or np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DataError("sigma_p_diag must be a nonempty vector of finite nonnegative entries")
    d = s.size
    tau = float(s.sum() / d)
    tr2 = float(np.dot(s, s) / d**2)
    if spec.family is Family.INNER_PRODUCT:
        h0, h1_0, h2_0 = (float(v) for v in eval_profile(spec, 0.0))
        h_tau = float(_h(spec, tau))
        alpha = h0 + h2_0 * tr2 / 2.0
        beta = h1_0
        gamma = h_tau - h0 - tau * h1_0
        h1c, h2c = h1_0, h2_0
    else:
        hc, h1c, h2c = (float(v) for v in eval_profile(spec, -2.0 * tau))
        h0 = float(_h(spec, 0.0))
        alpha = hc + 2.0 * h2c * tr2
        beta = 2.0 * h1c
        gamma = h0 - 2.0 * tau * h1c - hc
    if strict and not gamma > 0:
        raise ModelError(
            f"implicit regularization gamma={gamma:.6g} <= 0 for {spec.describe()}: "
            "the profile has no positive curvature"
        )
    if strict and not beta > 0:
        raise ModelError(f"beta={beta:.6g} <= 0 for {spec.describe()}")
    return LinearizedParams(alpha, beta, gamma, tau, tr2, spec.family, h1c, h2c)


def cross_linearize_params(spec: KernelSpec, sigma_p_diag, sigma_q_diag,
                           form: CrossForm = CrossForm.TAYLOR) -> CrossLinearizedParams:
    sp = np.asarray(sigma_p_diag, dtype=float)
    sq = np.asarray(sigma_q_diag, dtype=float)
    if sp.shape != sq.shape:
        raise DataError("sigma_p_diag and sigma_q_diag must have the same length")
    form = CrossForm(form)
    tau_p = float(sp.mean())
    tau_q = float(sq.mean())
    if spec.family is Family.INNER_PRODUCT:
        beta_pq = float(eval_profile(spec, 0.0)[1])
        offset = float(_h(spec, 0.0)) if form is CrossForm.TAYLOR else 0.0
    else:
        c = -(tau_p + tau_q)
        hc, h1c, _ = (float(v) for v in eval_profile(spec, c))
        beta_pq = 2.0 * h1c
        offset = hc if form is CrossForm.TAYLOR else -hc
    return CrossLinearizedParams(beta_pq, tau_p, tau_q, spec.family, offset, form)


def centered_sq_norms(X, tau: float) -> np.ndarray:
    """psi_i = |x_i|^2 / d - tau."""
    X = np.asarray(X, dtype=float)
    return np.einsum("ij,ij->i", X, X) / X.shape[1] - tau


def gram_linearized(params: LinearizedParams, X, psi=None) -> GramMatrix:
    X = _check_design(X)
    n, d = X.shape
    if psi is None:
        psi = centered_sq_norms(X, params.tau)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (n,):
        raise DataError(f"psi must have length {n}, got shape {psi.shape}")
    K = params.alpha + params.beta * (X @ X.T) / d
    K[np.diag_indices(n)] += params.gamma
    if params.family is Family.RADIAL:
        A = psi[:, None] + psi[None, :]
        K += -params.h1_center * A + 0.5 * params.h2_center * A * A
    K = 0.5 * (K + K.T)
    return GramMatrix(K)


def cross_linearized(cp: CrossLinearizedParams, X, X_test, psi=None, psi_test=None) -> np.ndarray:
    X = _check_design(X, "X")
    X_test = _check_design(X_test, "X_test")
    if X.shape[1] != X_test.shape[1]:
        raise DataError(f"dimension mismatch: train d={X.shape[1]}, test d={X_test.shape[1]}")
    d = X.shape[1]
    out = cp.beta_pq * (X_test @ X.T) / d + cp.offset
    if cp.family is Family.RADIAL:
        psi = centered_sq_norms(X, cp.tau_p) if psi is None else np.asarray(psi, dtype=float)
        psi_test = centered_sq_norms(X_test, cp.tau_q) if psi_test is None else np.asarray(psi_test, dtype=float)
        if psi.shape != (X.shape[0],) or psi_test.shape != (X_test.shape[0],):
            raise DataError("psi / psi_test lengths do not match the designs")
        out = out - 0.5 * cp.beta_pq * (psi_test[:, None] + psi[None, :])
    return out


def spectral_norm(M) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    M = as_matrix(M)
    n = M.shape[0]
    if n <= EIGH_MAX_N:
        ev = np.linalg.eigvalsh(M)
        return float(max(abs(ev[0]), abs(ev[-1])))
    if not np.any(M):
        return 0.0
    # Lanczos from a fixed start vector keeps the result deterministic
    v0 = np.ones(n) + np.linspace(0.0, 1e-3, n)
    try:
        ev = eigsh(M, k=1, which="LM", v0=v0, tol=POWER_TOL, maxiter=POWER_MAX_ITER,
                   return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise ModelError("spectral norm iteration did not converge") from exc
        ev = exc.eigenvalues
    return float(np.max(np.abs(ev)))


def linearization_gap(spec: KernelSpec, sigma_p_diag, sigma_q_diag, X, X_test,
                      form: CrossForm = CrossForm.TAYLOR) -> Tuple[float, float]:
    """(||K - K_lin||_2, mean_j ||K(X, x_j) - K_lin(X, x_j)||_2)."""
    params = linearize_params(spec, sigma_p_diag, strict=False)
    cp = cross_linearize_params(spec, sigma_p_diag, sigma_q_diag, form=form)
    K = gram(spec, X).entries
    K_lin = gram_linearized(params, X).entries
    gap_gram = spectral_norm(K - K_lin)
    C = cross_gram(spec, X, X_test)
    C_lin = cross_linearized(cp, X, X_test)
    gap_cross = float(np.mean(np.linalg.norm(C - C_lin, axis=1)))
    return gap_gram, gap_cross


def implicit_ridge_ratio(params: LinearizedParams) -> float:
    return params.gamma / params.beta if params.beta > 0 else math.inf
