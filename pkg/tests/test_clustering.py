import warnings

import numpy as np
import pytest
from scipy.stats import multivariate_normal
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from rwspectral.clustering import (
    WeightedGaussianMixture,
    check_node_weights,
    gmm_em,
    kmeans,
    weighted_loglik,
    weights_from_degrees,
    wgmm_em,
)


def blobs(rng, n=200, sep=20.0, hetero=True):
    z = np.repeat([0, 1], n // 2)
    scale = rng.uniform(0.5, 2.0, n) if hetero else np.ones(n)
    X = rng.standard_normal((n, 2)) / np.sqrt(scale)[:, None]
    X[z == 1] += sep
    return X, z, scale


def test_weights_from_degrees():
    np.testing.assert_allclose(weights_from_degrees([1, 2, 3]), [0.5, 1.0, 1.5])
    np.testing.assert_allclose(weights_from_degrees([4, 4, 4]), 1.0)
    g = weights_from_degrees(np.random.default_rng(0).integers(1, 50, 997))
    assert abs(g.sum() - 997) < 1e-12 * 997
    with pytest.raises(ValueError):
        weights_from_degrees([0, 1])


def test_check_node_weights():
    with pytest.raises(ValueError, match="sum to n"):
        check_node_weights([1.0, 2.0], 2)


def test_loglik_single_point():
    m = 3
    ll = weighted_loglik(np.zeros((1, m)), [1.0], [1.0], np.zeros((1, m)), np.eye(m)[None])
    assert ll == pytest.approx(-m / 2 * np.log(2 * np.pi), abs=1e-14)


def test_loglik_naive_oracle(rng):
    n, m, K = 40, 2, 3
    X = rng.standard_normal((n, m))
    gamma = rng.uniform(0.2, 3, n)
    alpha = rng.dirichlet(np.ones(K))
    mu = rng.standard_normal((K, m))
    A = rng.standard_normal((K, m, m))
    C = A @ A.transpose(0, 2, 1) + np.eye(m)
    naive = sum(
        np.log(sum(alpha[k] * multivariate_normal(mu[k], C[k] / gamma[i]).pdf(X[i])
                   for k in range(K)))
        for i in range(n)
    )
    assert weighted_loglik(X, gamma, alpha, mu, C) == pytest.approx(naive, rel=1e-10)


def test_kmeans_toy():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [10.0, 10.0], [10.0, 10.0]])
    labels, centres = kmeans(X, 2)
    assert labels[0] == labels[1] != labels[2] == labels[3]
    np.testing.assert_allclose(sorted(centres.tolist()), [[0, 0], [10, 10]])
    _, c1 = kmeans(X, 1)
    np.testing.assert_allclose(c1, [[5, 5]])


def test_kmeans_beats_random_assignments(rng):
    X = rng.standard_normal((150, 2))
    labels, centres = kmeans(X, 3)
    wcss = ((X - centres[labels]) ** 2).sum()
    for _ in range(1000):
        r = rng.integers(0, 3, 150)
        cent = np.array([X[r == k].mean(0) if np.any(r == k) else X[0] for k in range(3)])
        assert wcss <= ((X - cent[r]) ** 2).sum() + 1e-9


def test_em_monotone(rng):
    X, _, scale = blobs(rng, sep=3.0)
    gamma = scale * (len(scale) / scale.sum())
    fit = wgmm_em(X, gamma, 3, seed=1)
    assert np.all(np.diff(fit.loglik_trace) >= -1e-9 * np.abs(fit.loglik_trace[1:]))


def test_em_unit_weights_bitmatch(rng):
    X, _, _ = blobs(rng, sep=4.0)
    a = wgmm_em(X, np.ones(len(X)), 2, seed=3)
    b = gmm_em(X, 2, seed=3)
    for field in ("alpha", "mu", "C", "beta", "loglik_trace"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))


def test_em_matches_sklearn_step(rng):
    # Independent implementation: one sklearn EM step from our first M-step.
    X, _, _ = blobs(rng, sep=3.0)
    first = gmm_em(X, 2, seed=0, max_iter=1)
    second = gmm_em(X, 2, seed=0, max_iter=2)
    sk = GaussianMixture(
        2, covariance_type="full", reg_covar=0.0, max_iter=1, tol=0.0,
        weights_init=first.alpha, means_init=first.mu,
        precisions_init=np.linalg.inv(first.C),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        sk.fit(X)
    np.testing.assert_allclose(sk.weights_, second.alpha, rtol=1e-8)
    np.testing.assert_allclose(sk.means_, second.mu, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(sk.covariances_, second.C, rtol=1e-8, atol=1e-10)


def test_k1_closed_form(rng):
    X = rng.standard_normal((50, 3))
    gamma = rng.uniform(0.1, 2, 50)
    gamma *= 50 / gamma.sum()
    fit = wgmm_em(X, gamma, 1)
    np.testing.assert_allclose(fit.mu[0], (gamma[:, None] * X).mean(0), atol=1e-12)
    assert fit.alpha[0] == 1.0
    assert fit.n_iter == 2 and fit.converged


def test_single_point():
    fit = gmm_em(np.array([[1.5, -2.0]]), 1)
    np.testing.assert_allclose(fit.mu, [[1.5, -2.0]])


@pytest.mark.parametrize("weighted", [True, False])
def test_separated_blobs_recovered(rng, weighted):
    X, z, scale = blobs(rng)
    if weighted:
        fit = wgmm_em(X, scale * (len(scale) / scale.sum()), 2)
    else:
        fit = gmm_em(X, 2)
    agree = np.mean(fit.labels == z)
    assert agree in (0.0, 1.0)


def test_estimator(rng):
    X, z, scale = blobs(rng)
    est = WeightedGaussianMixture(n_components=2, random_state=0)
    labels = est.fit_predict(X, sample_weight=scale)
    assert np.mean(labels == z) in (0.0, 1.0)
    np.testing.assert_array_equal(est.predict(X, sample_weight=scale * len(X) / scale.sum()),
                                  labels)
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(1), 1.0)
    assert np.isfinite(est.score(X))
    unit = WeightedGaussianMixture(2).fit(X)
    np.testing.assert_array_equal(unit.means_, gmm_em(X, 2).mu)
