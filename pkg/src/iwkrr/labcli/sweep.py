"""Sweep execution.

A task is one (decay, seed) group: it shares a covariance pair and a test set
across every training size, so the test-kernel spectrum is computed once per
group. Seeds are split with ``mix64`` and BLAS is pinned to one thread for the
whole run, which makes the output independent of the worker count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .. import bounds as bd
from .. import estimator as est
from .. import kernelcore as kc
from .. import synthdata as sd
from ..errors import ConfigurationError, DataError, ModelError, SingularSystemError
from .config import LambdaKind, SweepConfig


@dataclass(frozen=True)
class SweepRecord:
    seed_index: int
    n: int
    d: int
    decay_a: float
    lambda_: float
    weighting_mode: str
    bias_sq: float
    variance: float
    excess_risk: float
    mc_excess_risk: Optional[float]
    bound_variance_dominated: float
    bound_variance_residual: float
    bound_bias_in: float
    bound_bias_iw: float
    capacity_value: float
    effective_dimension_q: float
    gap_gram: float
    wall_ms: float

    def sort_key(self):
        return (self.decay_a, self.n, self.seed_index)


def record_field_names() -> List[str]:
    """CSV column names; ``lambda_`` is written as ``lambda``."""
    return [f.name.rstrip("_") for f in fields(SweepRecord)]


class ErrorReason(str, Enum):
    MODEL = "model_assumption"
    INADMISSIBLE_SHIFT = "inadmissible_shift"
    SINGULAR = "singular_system"
    DATA = "data"
    NONFINITE = "nonfinite_result"
    INTERNAL = "internal"


@dataclass(frozen=True)
class ErrorRecord:
    seed_index: int
    n: int
    d: int
    decay_a: float
    reason: ErrorReason
    message: str

    def sort_key(self):
        return (self.decay_a, self.n, self.seed_index)


@dataclass
class SweepResult:
    records: List[SweepRecord] = field(default_factory=list)
    errors: List[ErrorRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


ProgressSink = Callable[[int, int, object], None]


def group_seed(master_seed: int, decay_index: int, seed_index: int, seeds: int) -> int:
    return sd.mix64(master_seed, decay_index * seeds + seed_index)


def cell_seed(group: int, n: int) -> int:
    return sd.mix64(group, n)


def resolve_lambda(cfg: SweepConfig, lin: kc.LinearizedParams, n: int) -> float:
    rule = cfg.lambda_rule
    if rule.kind is LambdaKind.FIXED_VALUE:
        return float(rule.value)
    if rule.kind is LambdaKind.SCHEDULE:
        return float(bd.lambda_schedule(rule.schedule, n)[2])
    C = lin.gamma / 10.0 if rule.C is None else rule.C
    return float(C * n ** (-rule.c))


def _classify(exc: Exception) -> ErrorReason:
    if isinstance(exc, SingularSystemError):
        return ErrorReason.SINGULAR
    if isinstance(exc, ModelError):
        return ErrorReason.INADMISSIBLE_SHIFT if "inadmissible" in str(exc) else ErrorReason.MODEL
    if isinstance(exc, (DataError, ConfigurationError)):
        return ErrorReason.DATA
    return ErrorReason.INTERNAL


def _run_cell(cfg: SweepConfig, ens: sd.DataEnsemble, lin: kc.LinearizedParams,
              diag: bd.ShiftDiagnostics, test_spectrum: np.ndarray, seed_index: int,
              data_seed: int) -> SweepRecord:
    t0 = time.perf_counter()
    pair = ens.covariances
    n, d = ens.n, ens.d
    X, X_test = ens.X_train, ens.X_test
    w_bar = sd.weight_vector(cfg.weighting, pair, X)
    w_true = sd.density_ratio(pair, X)
    lam = resolve_lambda(cfg, lin, n)

    K = kc.gram(cfg.kernel, X)
    K_lin = kc.gram_linearized(lin, X)
    C = kc.cross_gram(cfg.kernel, X, X_test)
    rep = est.decompose(K, C, ens.f_rho_train, ens.f_rho_test, lam, w_bar, cfg.sigma_eps)

    mc = None
    if cfg.mc_draws > 0:
        mc = est.excess_risk_mc(K, C, ens.f_rho_train, ens.f_rho_test, lam, w_bar, cfg.sigma_eps,
                                cfg.mc_draws, np.random.default_rng(sd.mix64(data_seed, 1)))

    bc = cfg.bound_constants
    v_dom, v_res = bd.variance_bound(X, pair.sigma_q, lin, lam, w_bar, cfg.sigma_eps, diag, bc.eps_log)
    W_max = float(max(np.max(w_true), np.max(w_bar)))
    b_in, b_iw = bd.bias_bound_arbitrary(K_lin, w_true, w_bar, lam, K.kappa, W_max, bc.delta, diag,
                                         bc.C_tilde, bc.eps_log)
    cap = bd.variance_capacity(X, lin, lam, w_bar)
    eff = bd.effective_dimension(test_spectrum, lam) if lam > 0 else float(np.count_nonzero(test_spectrum))
    gap = kc.spectral_norm(K.entries - K_lin.entries)
    wall = (time.perf_counter() - t0) * 1e3 if cfg.record_timing else 0.0

    rec = SweepRecord(seed_index, n, d, float(pair.decay_exponent), lam, cfg.weighting.mode.value,
                      rep.bias_sq, rep.variance, rep.bias_sq + rep.variance, mc,
                      v_dom, v_res, b_in, b_iw, cap, eff, gap, wall)
    bad = [f.name for f in fields(rec)
           if isinstance(getattr(rec, f.name), float) and not np.isfinite(getattr(rec, f.name))]
    if bad:
        raise FloatingPointError(f"nonfinite fields: {', '.join(bad)}")
    return rec


def _run_group(cfg: SweepConfig, decay_index: int, seed_index: int):
    a = cfg.decay_list[decay_index]
    g = group_seed(cfg.master_seed, decay_index, seed_index, cfg.seeds)
    out: List[object] = []
    lin = diag = spectrum = None
    setup_error: Optional[Exception] = None
    try:
        lin = kc.linearize_params(cfg.kernel, sd.make_covariance(cfg.d, a, cfg.normalize_covariance))
    except Exception as exc:  # recorded per cell below
        setup_error = exc
    for n in cfg.n_list:
        data_seed = cell_seed(g, n)
        try:
            if setup_error is not None:
                raise setup_error
            ens = sd.gen_dataset(cfg.d, n, cfg.n_test, a, cfg.sigma_eps, data_seed,
                                 normalize=cfg.normalize_covariance, cov_seed=g,
                                 perturb=cfg.perturb_covariance)
            if spectrum is None:
                pair = ens.covariances
                diag = bd.shift_diagnostics(pair.sigma_p, pair.sigma_q,
                                            cfg.bound_constants.m_p, cfg.bound_constants.m_q)
                spectrum = bd.operator_spectrum(kc.gram(cfg.kernel, ens.X_test))
            out.append(_run_cell(cfg, ens, lin, diag, spectrum, seed_index, data_seed))
        except Exception as exc:
            reason = ErrorReason.NONFINITE if isinstance(exc, FloatingPointError) else _classify(exc)
            out.append(ErrorRecord(seed_index, n, cfg.d, float(a), reason,
                                   f"{type(exc).__name__}: {exc}"))
    return out


def run_sweep(cfg: SweepConfig, progress_sink: Optional[ProgressSink] = None,
              threads: int = 1) -> SweepResult:
    """One record (or error row) per (decay_a, n, seed), sorted by (decay_a, n, seed_index)."""
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    tasks: List[Tuple[int, int]] = [(i, s) for i in range(len(cfg.decay_list)) for s in range(cfg.seeds)]
    total = len(tasks) * len(cfg.n_list)
    result = SweepResult()
    done = 0

    def collect(items):
        nonlocal done
        for item in items:
            done += 1
            (result.errors if isinstance(item, ErrorRecord) else result.records).append(item)
            if progress_sink is not None:
                progress_sink(done, total, item)

    # BLAS limits are process-wide, so they are set once around the whole pool
    with threadpool_limits(limits=1):
        if threads == 1:
            for i, s in tasks:
                collect(_run_group(cfg, i, s))
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for items in pool.map(lambda t: _run_group(cfg, *t), tasks):
                    collect(items)
    result.records.sort(key=SweepRecord.sort_key)
    result.errors.sort(key=ErrorRecord.sort_key)
    return result
