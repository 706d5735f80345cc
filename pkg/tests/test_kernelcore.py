import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from iwkrr import kernelcore as kc
from iwkrr.errors import ConfigurationError, DataError, ModelError

POLY5 = kc.KernelSpec.polynomial(5)
GAUSS = kc.KernelSpec.gaussian()
EXPO = kc.KernelSpec.exponential()
LINEAR = kc.KernelSpec.custom(lambda u: 1.0 + u, lambda u: 1.0 + 0.0 * np.asarray(u),
                              lambda u: 0.0 * np.asarray(u))


# ---- profiles -------------------------------------------------------------------

@pytest.mark.parametrize("spec, expected", [(POLY5, (1, 5, 20)), (GAUSS, (1, 1, 1)), (EXPO, (1, 2, 4))])
def test_profile_values_at_zero(spec, expected):
    assert tuple(float(v) for v in kc.eval_profile(spec, 0.0)) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("spec", [POLY5, kc.KernelSpec.polynomial(2), GAUSS, EXPO])
def test_profile_derivatives_match_central_differences(spec):
    u = np.linspace(-2.0, 1.0, 61)
    # keep away from the polynomial root at -1 where relative error is meaningless
    if spec.profile == "polynomial":
        u = u[np.abs(1 + u) > 0.05]
    step = 1e-6
    h, h1, h2 = kc.eval_profile(spec, u)
    hp, h1p, _ = kc.eval_profile(spec, u + step)
    hm, h1m, _ = kc.eval_profile(spec, u - step)
    np.testing.assert_allclose((hp - hm) / (2 * step), h1, rtol=1e-5)
    np.testing.assert_allclose((h1p - h1m) / (2 * step), h2, rtol=1e-5)


def test_custom_profile_missing_derivative_is_rejected():
    with pytest.raises(ConfigurationError, match="h2"):
        kc.KernelSpec(kc.Family.INNER_PRODUCT, "custom", h=np.exp, h1=np.exp)


def test_unknown_profile_and_bad_degree_rejected():
    with pytest.raises(ConfigurationError):
        kc.KernelSpec(kc.Family.RADIAL, "laplace")
    with pytest.raises(ConfigurationError):
        kc.KernelSpec.polynomial(0)


def test_builtin_profiles_are_admissible_and_linear_is_not():
    assert kc.profile_admissible(POLY5) and kc.profile_admissible(GAUSS) and kc.profile_admissible(EXPO)
    assert not kc.profile_admissible(LINEAR)


# ---- Gram matrices --------------------------------------------------------------

def test_radial_gaussian_diagonal_is_one():
    X = np.random.default_rng(0).standard_normal((7, 3)) * 5
    np.testing.assert_array_equal(np.diag(kc.gram(GAUSS, X).entries), np.ones(7))


def test_polynomial_gram_hand_values():
    X = np.array([[1.0, 1.0], [1.0, -1.0]])
    K2 = kc.gram(kc.KernelSpec.polynomial(2), X).entries
    assert K2[0, 1] == 1.0 and K2[0, 0] == 4.0
    assert kc.gram(POLY5, X[:1]).entries[0, 0] == 32.0
    assert kc.cross_gram(kc.KernelSpec.polynomial(2), X[:1], X[1:])[0, 0] == 1.0


def test_gram_rejects_nonfinite_input():
    with pytest.raises(DataError):
        kc.gram(POLY5, np.array([[1.0, np.nan]]))
    with pytest.raises(DataError):
        kc.cross_gram(POLY5, np.ones((2, 3)), np.ones((2, 4)))


@pytest.mark.parametrize("spec", [POLY5, GAUSS, EXPO])
def test_cross_gram_on_training_set_equals_gram(spec):
    X = np.random.default_rng(1).standard_normal((9, 4))
    np.testing.assert_allclose(kc.cross_gram(spec, X, X), kc.gram(spec, X).entries, rtol=1e-13, atol=1e-13)


def test_radial_cross_gram_transpose_relation():
    rng = np.random.default_rng(2)
    A, B = rng.standard_normal((5, 3)), rng.standard_normal((4, 3))
    np.testing.assert_allclose(kc.cross_gram(GAUSS, A, B), kc.cross_gram(GAUSS, B, A).T, rtol=1e-14)


@given(arrays(np.float64, (6, 5), elements=st.floats(-3, 3)))
def test_gram_symmetric_psd(X):
    for spec in (POLY5, GAUSS):
        K = kc.gram(spec, X).entries
        assert np.array_equal(K, K.T)
        ev = np.linalg.eigvalsh(K)
        assert ev[0] >= -1e-10 * max(1.0, np.abs(ev).max())


def test_gram_matrix_kappa_and_array_protocol():
    K = kc.gram(POLY5, np.array([[1.0, 1.0], [0.0, 0.0]]))
    assert K.kappa == 32.0 and K.n == 2
    assert np.asarray(K).shape == (2, 2)


# ---- linearized surrogates ---------------------------------------------------------

def test_linearized_params_polynomial_identity_covariance():
    p = kc.linearize_params(POLY5, np.ones(500))
    assert p.tau == 1.0 and p.beta == 5.0 and p.gamma == 26.0
    assert p.alpha == pytest.approx(1.02, rel=1e-14)


def test_linearized_params_radial_gaussian():
    p = kc.linearize_params(GAUSS, np.ones(50))
    assert p.beta == pytest.approx(2 * math.exp(-2), rel=1e-14)
    assert p.gamma == pytest.approx(1 - 3 * math.exp(-2), rel=1e-14)
    assert p.gamma == pytest.approx(0.59399, abs=5e-6)


def test_linear_profile_has_no_implicit_ridge():
    with pytest.raises(ModelError, match="gamma"):
        kc.linearize_params(LINEAR, np.ones(10))
    assert kc.linearize_params(LINEAR, np.ones(10), strict=False).gamma == 0.0


def test_gram_linearized_zero_design():
    p = kc.linearize_params(POLY5, np.ones(4))
    K = kc.gram_linearized(p, np.zeros((3, 4))).entries
    np.testing.assert_allclose(K, p.alpha * np.ones((3, 3)) + p.gamma * np.eye(3), rtol=1e-15)


def test_gram_linearized_two_point_assembly():
    p = kc.LinearizedParams(1.02, 5.0, 26.0, 1.0, 0.0, kc.Family.INNER_PRODUCT)
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    # XX^T/2 = [[2.5, 0.5], [0.5, 5]]
    expected = np.array([[1.02 + 12.5 + 26, 1.02 + 2.5], [1.02 + 2.5, 1.02 + 25 + 26]])
    np.testing.assert_allclose(kc.gram_linearized(p, X).entries, expected, rtol=1e-15)


def test_radial_correction_vanishes_on_the_sphere():
    d, tau = 6, 1.0
    rng = np.random.default_rng(3)
    X = rng.standard_normal((5, d))
    X *= np.sqrt(d * tau) / np.linalg.norm(X, axis=1, keepdims=True)
    p = kc.linearize_params(GAUSS, np.full(d, tau))
    K = kc.gram_linearized(p, X).entries
    expected = p.alpha + p.beta * X @ X.T / d + p.gamma * np.eye(5)
    np.testing.assert_allclose(K, expected, rtol=1e-13)


def test_radial_linearization_matches_entrywise_rederivation():
    rng = np.random.default_rng(4)
    d, n = 8, 6
    sigma = rng.uniform(0.5, 1.5, d)
    X = rng.standard_normal((n, d)) * np.sqrt(sigma)
    p = kc.linearize_params(GAUSS, sigma)
    tau = sigma.mean()
    c = -2 * tau
    h, h1, h2 = math.exp(c), math.exp(c), math.exp(c)
    tr2 = float(np.sum(sigma**2)) / d**2
    psi = [float(x @ x) / d - tau for x in X]
    oracle = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            s = psi[i] + psi[j]
            oracle[i, j] = (h + 2 * h2 * tr2 + 2 * h1 * float(X[i] @ X[j]) / d
                            - h1 * s + 0.5 * h2 * s * s + (1 - 2 * tau * h1 - h if i == j else 0.0))
    np.testing.assert_allclose(kc.gram_linearized(p, X).entries, oracle, rtol=1e-12, atol=1e-14)


def test_cross_linearized_inner_product():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((4, 3))
    sp = np.ones(3)
    table = kc.cross_linearize_params(POLY5, sp, sp, form=kc.CrossForm.TABLE)
    zero_row = kc.cross_linearized(table, X, np.zeros((1, 3)))
    np.testing.assert_array_equal(zero_row, np.zeros((1, 4)))
    xt = rng.standard_normal((1, 3))
    np.testing.assert_allclose(kc.cross_linearized(table, X, xt), 5 * xt @ X.T / 3, rtol=1e-15)
    taylor = kc.cross_linearize_params(POLY5, sp, sp)
    np.testing.assert_allclose(kc.cross_linearized(taylor, X, xt), 1 + 5 * xt @ X.T / 3, rtol=1e-15)


def test_cross_linearized_radial_orthogonal_points():
    d = 4
    X = np.array([[2.0, 0, 0, 0]])          # |x|^2/d = 1 = tau_p
    xt = np.array([[0, 2.0, 0, 0]])         # orthogonal, psi_x = 0
    cp = kc.cross_linearize_params(GAUSS, np.ones(d), np.ones(d))
    assert kc.cross_linearized(cp, X, xt)[0, 0] == pytest.approx(math.exp(-2), rel=1e-15)
    lit = kc.cross_linearize_params(GAUSS, np.ones(d), np.ones(d), form=kc.CrossForm.TABLE)
    assert kc.cross_linearized(lit, X, xt)[0, 0] == pytest.approx(-math.exp(-2), rel=1e-15)


def test_psi_length_checked():
    p = kc.linearize_params(POLY5, np.ones(3))
    with pytest.raises(DataError):
        kc.gram_linearized(p, np.ones((2, 3)), psi=np.zeros(3))


# ---- gaps -----------------------------------------------------------------------

def test_affine_profile_has_zero_gram_gap():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 5))
    gap, _ = kc.linearization_gap(LINEAR, np.ones(5), np.ones(5), X, X[:3])
    assert gap == 0.0 or gap < 1e-13


def test_single_row_gap_by_hand():
    x = np.array([[1.0, 2.0, 2.0]])       # |x|^2 / d = 3
    sp = np.ones(3)
    gap, _ = kc.linearization_gap(POLY5, sp, sp, x, x)
    p = kc.linearize_params(POLY5, sp)
    k_lin = p.alpha + p.beta * 3.0 + p.gamma
    assert gap == pytest.approx(abs(4.0**5 - k_lin), rel=1e-13)


def test_polynomial_gap_shrinks_with_dimension():
    meds = []
    for d in (100, 400):
        gaps = []
        for s in range(5):
            rng = np.random.default_rng(s)
            X = rng.standard_normal((d, d))
            gaps.append(kc.linearization_gap(POLY5, np.ones(d), np.ones(d), X, X[:20])[0])
        meds.append(np.median(gaps))
    assert meds[1] < meds[0]


def test_spectral_norm_iterative_branch(monkeypatch):
    rng = np.random.default_rng(7)
    A = rng.standard_normal((60, 60))
    M = A @ A.T
    exact = kc.spectral_norm(M)
    monkeypatch.setattr(kc, "EIGH_MAX_N", 10)
    assert kc.spectral_norm(M) == pytest.approx(exact, rel=1e-6)
    assert kc.spectral_norm(np.zeros((20, 20))) == 0.0
