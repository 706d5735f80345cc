import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from iwkrr import bounds as bd
from iwkrr import kernelcore as kc
from iwkrr.errors import ConfigurationError, DataError, ModelError

spectra = arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 1e3))


def test_capacity_examples():
    assert bd.capacity(np.ones(7), 1.0) == 7 / 4
    assert bd.capacity(np.array([1.0, 3.0]), 1.0) == pytest.approx(0.4375, rel=1e-15)
    s = np.array([0.5, 2.0, 9.0])
    assert bd.capacity(s, 1e9) <= s.sum() / 1e18


def test_capacity_rejects_nonpositive_b():
    with pytest.raises(DataError):
        bd.capacity(np.ones(2), 0.0)


@given(spectra)
def test_capacity_strictly_decreasing_in_b(s):
    assume(np.any(s > 0))
    vals = [bd.capacity(s, b) for b in np.geomspace(1e-2, 1e2, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@given(spectra, st.floats(1e-4, 1e4))
def test_capacity_am_gm_ceiling(s, b):
    assert bd.capacity(s, b) <= np.count_nonzero(s) / (4 * b) * (1 + 1e-12)


def test_capacity_of_matrix_examples():
    K = np.diag([2.0, 4.0])
    assert bd.capacity_of_matrix(K, 1.0, weights=np.array([1.0, 0.5])) == pytest.approx(4 / 9, rel=1e-14)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    M = A @ A.T
    assert bd.capacity_of_matrix(M, 0.7, weights=np.ones(6)) == pytest.approx(
        bd.capacity(np.linalg.eigvalsh(M), 0.7), rel=1e-12)
    assert bd.capacity_of_matrix(M, 1e12) < 1e-10


def test_capacity_of_nonsymmetric_product_without_weights():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((8, 8))
    K = A @ A.T
    w = rng.uniform(0.5, 2.0, 8)
    direct = bd.capacity_of_matrix(K * w[None, :], 0.3)
    assert direct == pytest.approx(bd.capacity_of_matrix(K, 0.3, weights=w), rel=1e-9)


def test_non_psd_matrix_rejected():
    with pytest.raises(ModelError):
        bd.capacity_of_matrix(np.diag([1.0, -1.0]), 1.0)
    with pytest.raises(ModelError):
        bd.capacity_of_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]), 1.0)


def test_effective_dimension_examples():
    assert bd.effective_dimension(np.array([1.0]), 1.0) == 0.5
    assert bd.effective_dimension(np.array([1.0, 0.5, 0.25]), 0.5) == pytest.approx(1.5, rel=1e-15)
    assert bd.effective_dimension(np.array([3.0, 1.0, 0.0, 0.0]), 1e-14) == pytest.approx(2.0, rel=1e-12)
    with pytest.raises(DataError):
        bd.effective_dimension(np.ones(2), 0.0)


@given(spectra)
def test_effective_dimension_nonincreasing_in_lambda(s):
    vals = [bd.effective_dimension(s, lam) for lam in np.geomspace(1e-6, 1e6, 40)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert vals[0] <= np.count_nonzero(s) + 1e-9


def test_operator_spectrum_scales_by_m():
    K = np.diag([4.0, 2.0])
    np.testing.assert_allclose(np.sort(bd.operator_spectrum(K)), [1.0, 2.0])


def test_shift_diagnostics_examples():
    sp = np.linspace(0.5, 2.0, 100)
    same = bd.shift_diagnostics(sp, sp, 8, 8)
    assert same.trace_ratio == 1.0 and same.c_pq == 0.0 and same.admissible
    doubled = bd.shift_diagnostics(sp, 2 * sp, 8, 8)
    assert doubled.trace_ratio == pytest.approx(2.0, rel=1e-15)
    assert doubled.c_pq == pytest.approx(math.log(2) / math.log(100), rel=1e-14)
    assert doubled.c_pq == pytest.approx(0.1505, abs=5e-5)
    no_moments = bd.shift_diagnostics(sp, sp, 8, 0)
    assert no_moments.theta_q == 0.25 and not no_moments.admissible
    assert same.d == 100


@given(st.one_of(st.just(0.0), st.floats(1e-9, 1e6)))
def test_admissibility_matches_exponent_rule(m):
    # below ~1e-16 the margin 2 theta - 1/2 = m / (2(8+m)) underflows against 1/2
    th = bd.theta(m)
    assert 0.25 <= th < 0.5
    sp = np.ones(50)
    assert bd.shift_diagnostics(sp, sp, m, m).admissible == (m > 0)


def _diag(d, admissible=True):
    sp = np.ones(d)
    return bd.shift_diagnostics(sp, sp, 8, 8 if admissible else 0)


def test_variance_bound_without_regularization():
    rng = np.random.default_rng(2)
    n, d = 12, 20
    X = rng.standard_normal((n, d))
    lin = kc.linearize_params(kc.KernelSpec.polynomial(5), np.ones(d))
    dom, res = bd.variance_bound(X, np.full(d, 0.8), lin, 0.0, np.ones(n), 1.5, _diag(d))
    cap = bd.capacity(np.linalg.eigvalsh(X @ X.T / d), lin.gamma / lin.beta)
    assert dom == pytest.approx(8 * 2.25 * 0.8 / d * cap, rel=1e-12)
    th = bd.theta(8)
    assert res == pytest.approx(8 * 2.25 / lin.gamma**2 * d ** (-(4 * th - 1)) * math.log(d) ** 4.2, rel=1e-12)


def test_variance_bound_scalar_case():
    d = 16
    lin = kc.LinearizedParams(1.0, 5.0, 26.0, 1.0, 0.0, kc.Family.INNER_PRODUCT)
    dom, _ = bd.variance_bound(np.array([[math.sqrt(d)] + [0.0] * (d - 1)]), np.ones(d), lin, 0.0,
                               np.ones(1), 1.0, _diag(d))
    assert dom == pytest.approx(8 / d * 1 / (26 / 5 + 1) ** 2, rel=1e-14)


def test_variance_bound_regularizer_enters_capacity():
    d = 16
    lin = kc.LinearizedParams(1.0, 5.0, 26.0, 1.0, 0.0, kc.Family.INNER_PRODUCT)
    X = np.array([[math.sqrt(d)] + [0.0] * (d - 1)])
    dom, _ = bd.variance_bound(X, np.ones(d), lin, 0.5, np.array([2.0]), 1.0, _diag(d))
    ev = 1.0 + 0.5 * 1 / (5.0 * 2.0)
    assert dom == pytest.approx(8 / d * ev / (26 / 5 + ev) ** 2, rel=1e-14)


def test_variance_bound_rejects_inadmissible_shift():
    lin = kc.linearize_params(kc.KernelSpec.polynomial(5), np.ones(4))
    with pytest.raises(ModelError, match="inadmissible"):
        bd.variance_bound(np.ones((2, 4)), np.ones(4), lin, 0.1, np.ones(2), 1.0, _diag(4, admissible=False))


def test_bias_bound_examples():
    d = 50
    diag = _diag(d)
    tails = lambda n, kappa, W: (6 * kappa * W * math.sqrt(math.log(20) / (2 * n))
                                 + d ** (-diag.theta_p) * (0.05 ** -0.5 + math.log(d) ** 0.525) * W)
    b_in, b_iw = bd.bias_bound_arbitrary(np.eye(4), np.ones(4), np.ones(4), 0.0, 1.0, 1.0, 0.05, diag)
    assert b_in == 1.0
    assert b_iw == pytest.approx(tails(4, 1.0, 1.0), rel=1e-14)
    b_in, b_iw = bd.bias_bound_arbitrary(np.array([[2.0]]), np.ones(1), np.ones(1), 1.0, 2.0, 1.0, 0.05, diag)
    assert b_in == 2.0
    assert b_iw == pytest.approx(8 / 9 + 2.0 + tails(1, 2.0, 1.0), rel=1e-14)


def test_bias_bound_trace_matches_dense_evaluation():
    rng = np.random.default_rng(3)
    n, lam = 10, 0.03
    A = rng.standard_normal((n, n))
    K = A @ A.T / n
    w = rng.uniform(0.2, 3.0, n)
    wb = np.minimum(w, 1.5)
    B = np.linalg.inv(lam * n * np.eye(n) + K @ np.diag(wb))
    dense = 4 * lam**2 * n * np.trace(B @ B @ K @ np.diag(w))
    diag = _diag(30)
    _, b_iw = bd.bias_bound_arbitrary(K, w, wb, lam, 1.0, 3.0, 0.05, diag, C_tilde=0.0)
    rest = lam**2 * 3.0 + 6 * 3.0 * math.sqrt(math.log(20) / (2 * n))
    assert b_iw - rest == pytest.approx(dense, rel=1e-9)


def test_bias_bound_needs_dimension():
    diag = bd.ShiftDiagnostics(1, 1, 1, 0, 0.375, 0.375, 8, 8, True)
    with pytest.raises(DataError):
        bd.bias_bound_arbitrary(np.eye(2), np.ones(2), np.ones(2), 0.1, 1.0, 1.0, 0.05, diag)


def test_bias_bound_ratio_examples():
    n = 6
    lam = 1.0 / n
    assert bd.bias_bound_ratio(np.eye(n), np.ones(n), lam) == pytest.approx(1 + lam**2 * n * n / 4, rel=1e-14)
    K = np.diag([3.0, 1.0, 2.0])
    small = bd.bias_bound_ratio(K, np.ones(3), 1e-12)
    assert small == pytest.approx(2.0, rel=1e-9)


def test_schedule_examples():
    p = bd.ScheduleParams(r_bar=0.5, s_qbar=1.0, t_wbar=0.0, c_w2=0.0)
    c, C, lam = bd.lambda_schedule(p, 400)
    assert c == 0.5
    assert lam == pytest.approx(C / 20, rel=1e-15)
    assert bd.lambda_schedule(bd.ScheduleParams(c_w2=0.25), 10)[0] == 0.0
    c2 = 0.1
    c, _, _ = bd.lambda_schedule(bd.ScheduleParams(r_bar=0.5, t_wbar=1.0, c_w1=0.0, c_w2=c2), 10)
    assert c == pytest.approx((1 - 4 * c2) / 2, rel=1e-15)


@given(st.floats(0.5, 0.99), st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.25),
       st.floats(0.1, 10), st.floats(0.1, 3), st.floats(0.1, 5), st.floats(0.1, 2), st.floats(0.01, 0.99))
def test_schedule_constant_meets_inequality_with_equality(r, s, t, c2, W, sig, E, zeta, delta):
    p = bd.ScheduleParams(r_bar=r, s_qbar=s, t_wbar=t, c_w2=c2, W_wbar=W, sigma_wbar=sig, E_qbar=E,
                          zeta=zeta, delta=delta)
    _, C, _ = bd.lambda_schedule(p, 100)
    A = t + (1 - t) * s
    rhs = 64 * (W + sig**2) * E ** (2 * (1 - t)) * (2 / zeta) ** (2 * c2) * math.log(6 / delta) ** 2
    assert C ** (1 + A) == pytest.approx(rhs, rel=1e-10)


def test_schedule_parameter_validation():
    with pytest.raises(ConfigurationError):
        bd.ScheduleParams(r_bar=1.0)
    with pytest.raises(ConfigurationError):
        bd.ScheduleParams(c_w1=0.3, c_w2=0.1)
    with pytest.raises(ConfigurationError):
        bd.ScheduleParams(c_w2=0.3)
    with pytest.raises(ConfigurationError):
        bd.ScheduleParams(delta=1.0)
