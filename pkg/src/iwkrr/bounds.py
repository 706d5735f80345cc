"""Theoretical quantities overlaid on the empirical curves.

Every product A D of a symmetric PSD matrix A and a positive diagonal D is
handled through the similar symmetric matrix D^{1/2} A D^{1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, DataError, ModelError
from .kernelcore import LinearizedParams, as_matrix

NEG_EIG_TOL = 1e-8


@dataclass(frozen=True)
class ShiftDiagnostics:
    tau_p: float
    tau_q: float
    trace_ratio: float
    c_pq: float
    theta_p: float
    theta_q: float
    m_p: float
    m_q: float
    admissible: bool
    d: int = 0


@dataclass(frozen=True)
class ScheduleParams:
    r_bar: float = 0.5
    s_qbar: float = 1.0
    t_wbar: float = 0.0
    c_w1: float = 0.0
    c_w2: float = 0.0
    W_wbar: float = 1.0
    sigma_wbar: float = 1.0
    E_qbar: float = 1.0
    zeta: float = 1.0
    delta: float = 0.05
    # source-condition multipliers; carried for reference, not used numerically
    c_H: float = 0.0
    C_H: float = 1.0

    def __post_init__(self):
        if not 0.5 <= self.r_bar < 1:
            raise ConfigurationError(f"r_bar must lie in [1/2, 1), got {self.r_bar}")
        for name in ("s_qbar", "t_wbar"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        if self.c_w1 < 0 or self.c_w2 < 0:
            raise ConfigurationError("c_w1 and c_w2 must be >= 0")
        if self.c_w1 > 2 * self.c_w2 + 1e-15:
            raise ConfigurationError(f"need c_w1 <= 2 c_w2, got c_w1={self.c_w1}, c_w2={self.c_w2}")
        if self.c_w2 > 0.25:
            raise ConfigurationError(f"need c_w2 <= 1/4, got {self.c_w2}")
        for name in ("W_wbar", "sigma_wbar", "E_qbar", "zeta"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.C_H <= 0 or self.c_H < 0:
            raise ConfigurationError("need C_H > 0 and c_H >= 0")


@dataclass(frozen=True)
class BoundReport:
    variance_dominated: float
    variance_residual: Optional[float]
    bias_intrinsic: float
    bias_reweighting: float
    capacity_value: float
    lambda_used: float


def capacity(spectrum, b: float) -> float:
    """N(K, b) = sum_i l_i / (b + l_i)^2."""
    if not b > 0:
        raise DataError(f"capacity needs b > 0, got {b}")
    lam = np.asarray(spectrum, dtype=float)
    return float(np.sum(lam / (b + lam) ** 2))


def _sym_spectrum(S: np.ndarray) -> np.ndarray:
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    scale = max(float(np.max(np.abs(ev))), 1.0) if ev.size else 1.0
    if ev.size and ev[0] < -NEG_EIG_TOL * scale:
        raise ModelError(f"matrix is not PSD: smallest eigenvalue {ev[0]:.3e}")
    return np.clip(ev, 0.0, None)


def weighted_spectrum(K, weights=None) -> np.ndarray:
    """Spectrum of K diag(weights), computed on diag(w)^{1/2} K diag(w)^{1/2}."""
    K = as_matrix(K)
    if weights is None:
        return _sym_spectrum(K)
    r = np.sqrt(np.asarray(weights, dtype=float))
    return _sym_spectrum(r[:, None] * K * r[None, :])


def capacity_of_matrix(M, b: float, weights=None) -> float:
    """Capacity of M, or of M diag(weights) when ``weights`` is given.

    A nonsymmetric M without weights falls back to a general eigensolve and
    requires a (numerically) real nonnegative spectrum.
    """
    M = as_matrix(M)
    if weights is not None or np.allclose(M, M.T, rtol=1e-12, atol=0.0):
        return capacity(weighted_spectrum(M, weights), b)
    ev = np.linalg.eigvals(M)
    scale = max(float(np.max(np.abs(ev))), 1.0)
    if np.max(np.abs(ev.imag)) > 1e-8 * scale or np.min(ev.real) < -NEG_EIG_TOL * scale:
        raise ModelError("matrix is not similar to a PSD matrix")
    return capacity(np.clip(ev.real, 0.0, None), b)


def effective_dimension(spectrum, lam: float) -> float:
    """sum_i l_i / (l_i + lam)."""
    if not lam > 0:
        raise DataError(f"effective dimension needs lam > 0, got {lam}")
    s = np.clip(np.asarray(spectrum, dtype=float), 0.0, None)
    return float(np.sum(s / (s + lam)))


def operator_spectrum(K_test) -> np.ndarray:
    """Eigenvalues of K(X_mu, X_mu) / m, the empirical proxy of the integral operator."""
    K = as_matrix(K_test)
    return weighted_spectrum(K) / K.shape[0]


def theta(m: float) -> float:
    return 0.5 - 2.0 / (8.0 + m)


def shift_diagnostics(sigma_p, sigma_q, m_p: float, m_q: float) -> ShiftDiagnostics:
    sp = np.asarray(sigma_p, dtype=float)
    sq = np.asarray(sigma_q, dtype=float)
    if sp.shape != sq.shape or np.any(sp <= 0) or np.any(sq <= 0):
        raise DataError("covariance diagonals must be positive vectors of equal length")
    if m_p < 0 or m_q < 0:
        raise DataError("m_p and m_q must be >= 0")
    d = sp.size
    ratio = float(np.mean(sq / sp))
    if d > 1:
        c_pq = max(0.0, math.log(ratio) / math.log(d))
    else:
        c_pq = 0.0
    th_p, th_q = theta(m_p), theta(m_q)
    return ShiftDiagnostics(float(sp.mean()), float(sq.mean()), ratio, c_pq,
                            th_p, th_q, m_p, m_q, c_pq < 2 * th_q - 0.5, d)


def variance_capacity(X_train, lin: LinearizedParams, lam: float, weights) -> float:
    """N(X X^T/d + (lam n / beta) Wbar^{-1}; gamma / beta)."""
    X = np.asarray(X_train, dtype=float)
    n, d = X.shape
    M = X @ X.T / d
    if lam > 0:
        M[np.diag_indices(n)] += lam * n / (lin.beta * np.asarray(weights, dtype=float))
    return capacity(_sym_spectrum(M), lin.gamma / lin.beta)


def variance_bound(X_train, sigma_q_diag, lin: LinearizedParams, lam: float, weights,
                   sigma_eps: float, diag: ShiftDiagnostics, eps_log: float = 0.05) -> Tuple[float, float]:
    """(dominated, residual) terms of the high-probability variance bound."""
    if not diag.admissible:
        raise ModelError(
            f"shift is inadmissible: c_pq={diag.c_pq:.4g} must be < 2*theta_q - 1/2 = "
            f"{2 * diag.theta_q - 0.5:.4g}; the cross-kernel linearization need not converge"
        )
    X = np.asarray(X_train, dtype=float)
    d = X.shape[1]
    cap = variance_capacity(X, lin, lam, weights)
    sq_max = float(np.max(sigma_q_diag))
    dominated = 8.0 * sigma_eps**2 * sq_max / d * cap
    exponent = 4 * diag.theta_q - 1 - 2 * diag.c_pq
    residual = 8.0 * sigma_eps**2 / lin.gamma**2 * d ** (-exponent) * math.log(d) ** (4 * (1 + eps_log))
    return float(dominated), float(residual)


def _ratio_trace(K, used_weights, true_weights, b: float, power: int = 2) -> float:
    """Tr((b I + K Wbar)^{-power} K W) via the symmetric similarity."""
    wb = np.asarray(used_weights, dtype=float)
    w = np.asarray(true_weights, dtype=float)
    r = np.sqrt(wb)
    S = r[:, None] * as_matrix(K) * r[None, :]
    ev, V = np.linalg.eigh(0.5 * (S + S.T))
    ev = np.clip(ev, 0.0, None)
    denom = b + ev
    if np.any(denom <= 0):
        raise ModelError("lambda n I + K_lin Wbar is singular")
    proj = np.einsum("ij,i,ij->j", V, w / wb, V)
    return float(np.sum(ev / denom**power * proj))


def bias_bound_arbitrary(K_lin, true_weights, used_weights, lam: float, kappa: float,
                         W_max: float, delta: float, diag: ShiftDiagnostics,
                         C_tilde: float = 1.0, eps_log: float = 0.05) -> Tuple[float, float]:
    """(B_in, B_iw) of the bias bound valid for any regularization level."""
    if lam < 0:
        raise DataError(f"lambda must be >= 0, got {lam}")
    if not 0 < delta < 1:
        raise DataError(f"delta must lie in (0, 1), got {delta}")
    K = as_matrix(K_lin)
    n = K.shape[0]
    w = np.asarray(true_weights, dtype=float)
    d = diag.d
    if d < 2:
        raise DataError("diagnostics must carry the dimension d >= 2")
    b_in = float(np.dot(np.diag(K), w) / n)
    if lam > 0:
        first = 4.0 * lam**2 * n * _ratio_trace(K, used_weights, w, lam * n)
    else:
        first = 0.0
    b_iw = (first
            + lam**2 * kappa * W_max
            + 6.0 * kappa * W_max * math.sqrt(math.log(1.0 / delta) / (2.0 * n))
            + C_tilde * d ** (-diag.theta_p) * (delta**-0.5 + math.log(d) ** ((1 + eps_log) / 2)) * W_max)
    return b_in, float(b_iw)


def bias_bound_ratio(K_lin, ratio_weights, lam: float, n: Optional[int] = None) -> float:
    """Leading-order bias when the weights are the density ratio itself."""
    if not lam > 0:
        raise DataError(f"bias_bound_ratio needs lambda > 0, got {lam}")
    K = as_matrix(K_lin)
    n = K.shape[0] if n is None else n
    w = np.asarray(ratio_weights, dtype=float)
    trace_term = float(np.dot(np.diag(K), w) / n)
    return trace_term + lam**2 * n * capacity_of_matrix(K, n * lam, weights=w)


def lambda_schedule(p: ScheduleParams, n: int) -> Tuple[float, float, float]:
    """(c_lambda, C_lambda, lambda = C_lambda n^{-c_lambda}).

    C_lambda is the smallest constant with
    C^{1+A} >= 64 (W + sigma^2) E^{2(1-t)} (2/zeta)^{2 c_w2} log^2(6/delta),
    A = t + (1 - t) s.
    """
    A = p.t_wbar + (1 - p.t_wbar) * p.s_qbar
    denom = 2 * p.r_bar + A
    if denom <= 0 or 1 + A <= 0:
        raise ModelError("degenerate schedule: nonpositive denominator")
    c_lam = (1 - 4 * p.c_w2) / denom
    C_lam = schedule_rhs(p) ** (1.0 / (1 + A))
    return c_lam, C_lam, C_lam * float(n) ** (-c_lam)


def schedule_rhs(p: ScheduleParams) -> float:
    return (64.0 * (p.W_wbar + p.sigma_wbar**2) * p.E_qbar ** (2 * (1 - p.t_wbar))
            * (2.0 / p.zeta) ** (2 * p.c_w2) * math.log(6.0 / p.delta) ** 2)
