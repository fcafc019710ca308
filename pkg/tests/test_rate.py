import numpy as np
import pytest

from redunet.errors import EmptyClass, NotPositiveDefinite, ZeroVector
from redunet.rate import (FeatureMatrix, Partition, RateParams, class_rate,
                          coding_rate, logdet_psd, rate_components,
                          rate_gradient, rate_reduction)

from oracles import central_diff_grad, labels_for, rng_for, slogdet_rate


def test_logdet_diagonal():
    assert abs(logdet_psd(np.diag([2.0, 8.0])) - np.log(16.0)) < 1e-12


def test_logdet_empty_matrix():
    assert logdet_psd(np.zeros((0, 0))) == 0.0


def test_logdet_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        logdet_psd(np.diag([1.0, -1.0]))


def test_logdet_rejects_asymmetric():
    with pytest.raises(ValueError):
        logdet_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_logdet_matches_slogdet(seed):
    rng = rng_for(seed)
    B = rng.standard_normal((6, 6))
    A = B @ B.T + np.eye(6)
    _, expected = np.linalg.slogdet(A)
    assert abs(logdet_psd(A) - expected) < 1e-10


def test_logdet_complex_hermitian():
    rng = rng_for(3)
    B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    A = B @ B.conj().T + np.eye(5)
    _, expected = np.linalg.slogdet(A)
    assert abs(logdet_psd(A) - expected) < 1e-10


def test_coding_rate_identity_features():
    # Z = I_n has alpha = 1/eps^2 and rate (n/2) log(1 + 1/eps^2).
    n, eps = 5, 0.3
    expected = 0.5 * n * np.log(1 + 1 / eps**2)
    assert abs(coding_rate(np.eye(n), eps) - expected) < 1e-12


def test_coding_rate_scalar_closed_form():
    z, eps = 0.7, 0.5
    expected = 0.5 * np.log(1 + (1 / eps**2) * z**2)
    assert abs(coding_rate(np.array([[z]]), eps) - expected) < 1e-14


@pytest.mark.parametrize("n,m", [(7, 3), (3, 7), (4, 4)])
def test_primal_dual_identity(n, m):
    rng = rng_for(n * 10 + m)
    Z = rng.standard_normal((n, m))
    eps = 0.4
    alpha = n / (m * eps**2)
    _, primal = np.linalg.slogdet(np.eye(n) + alpha * Z @ Z.T)
    _, dual = np.linalg.slogdet(np.eye(m) + alpha * Z.T @ Z)
    assert abs(primal - dual) < 1e-9
    assert abs(coding_rate(Z, eps) - 0.5 * primal) < 1e-9


def test_single_class_rate_reduction_is_zero():
    rng = rng_for(7)
    Z = rng.standard_normal((5, 12))
    P = Partition(np.zeros(12, dtype=int))
    assert abs(rate_reduction(Z, P, 0.5)) < 1e-10


@pytest.mark.parametrize("seed,n,m,k", [(0, 4, 10, 2), (1, 6, 15, 3), (2, 3, 9, 2)])
def test_rate_components_match_slogdet_oracle(seed, n, m, k):
    rng = rng_for(seed)
    Z = rng.standard_normal((n, m))
    labels = labels_for(m, k, rng)
    eps = 0.35
    dR, R, Rc = rate_components(Z, Partition(labels), eps)
    odR, oR, oRc = slogdet_rate(Z, labels, eps)
    assert abs(R - oR) < 1e-10
    assert abs(Rc - oRc) < 1e-10
    assert abs(dR - odR) < 1e-10


def test_rate_reduction_permutation_invariant():
    rng = rng_for(11)
    Z = rng.standard_normal((4, 12))
    labels = labels_for(12, 3, rng)
    perm = rng.permutation(12)
    a = rate_reduction(Z, Partition(labels), 0.5)
    b = rate_reduction(Z[:, perm], Partition(labels[perm]), 0.5)
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gradient_matches_central_differences(seed):
    rng = rng_for(100 + seed)
    n, m, k = 4, 8, 2
    Z = rng.standard_normal((n, m))
    labels = labels_for(m, k, rng)
    eps = 0.5
    grad = rate_gradient(Z, Partition(labels), eps)
    oracle = central_diff_grad(lambda W: slogdet_rate(W, labels, eps)[0], Z)
    rel = np.linalg.norm(grad - oracle) / np.linalg.norm(oracle)
    assert rel < 1e-6


def test_partition_rejects_empty_class():
    with pytest.raises(EmptyClass):
        Partition(np.array([0, 0, 2]), k=3)
    with pytest.raises(EmptyClass):
        Partition(np.array([], dtype=int))


def test_partition_counts_and_gamma():
    P = Partition(np.array([0, 1, 1, 0, 1]))
    assert P.k == 2
    assert list(P.counts) == [2, 3]
    assert np.allclose(P.gamma, [0.4, 0.6])
    assert np.allclose(P.onehot().sum(axis=0), 1.0)


def test_rate_params_coefficients():
    p = RateParams(0.5)
    assert abs(p.alpha(4, 8) - 4 / (8 * 0.25)) < 1e-15
    assert abs(p.alpha_class(4, 3) - 4 / (3 * 0.25)) < 1e-15
    with pytest.raises(ValueError):
        RateParams(0.0)


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        FeatureMatrix(np.array([[2.0], [0.0]]), normalized=True)
    fm = FeatureMatrix(np.array([[2.0, 0.0], [0.0, 3.0]]))
    normed = fm.normalize()
    assert np.allclose(np.linalg.norm(normed.data, axis=0), 1.0)
    with pytest.raises(ZeroVector):
        FeatureMatrix(np.zeros((3, 2))).normalize()


def test_class_rate_checks_sample_count():
    with pytest.raises(ValueError):
        class_rate(np.eye(3), Partition(np.array([0, 1])), 0.5)
