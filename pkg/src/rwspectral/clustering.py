"""k-means, Gaussian mixture and weighted Gaussian mixture clustering.

The weighted mixture gives point ``i`` the covariance ``C_k / gamma_i`` in
component ``k``; with ``gamma`` proportional to node degree, high-degree
nodes count as more precise observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import KMeans
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

LOG_2PI = np.log(2 * np.pi)
EMPTY_TOL = 1e-12
EIG_FLOOR = 1e-12
REG_SCALE = 1e-9


class CovarianceCollapseError(ValueError):
    """A component covariance stayed singular after regularisation."""


@dataclass(frozen=True)
class MixtureFit:
    """Fitted (weighted) Gaussian mixture.

    Attributes
    ----------
    alpha : (K,) mixing proportions
    mu : (K, m) component means
    C : (K, m, m) component covariances (for a point of unit weight)
    beta : (n, K) responsibilities
    labels : (n,) most probable component per point
    loglik_trace : log-likelihood after every M-step
    """

    alpha: np.ndarray
    mu: np.ndarray
    C: np.ndarray
    beta: np.ndarray
    labels: np.ndarray
    loglik_trace: np.ndarray
    gamma: np.ndarray
    converged: bool
    n_iter: int

    @property
    def loglik(self):
        return float(self.loglik_trace[-1])

    def to_dict(self):
        return {
            "alpha": self.alpha.tolist(),
            "mu": self.mu.tolist(),
            "C": self.C.tolist(),
            "loglik": self.loglik,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


def weights_from_degrees(degrees):
    """Node weights ``gamma_i = n * d_i / sum(d)``, so that ``sum(gamma) = n``."""
    d = np.asarray(degrees, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("empty degree vector")
    zero = np.flatnonzero(~(d > 0))
    if zero.size:
        raise ValueError(f"degrees must be positive; offending nodes {zero[:20]}")
    return d * (d.size / d.sum())


def check_node_weights(gamma, n):
    """Validate weights: positive, length ``n``, summing to ``n`` (1e-9 rel.)."""
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.shape != (n,):
        raise ValueError(f"expected {n} node weights, got {gamma.shape[0]}")
    if np.any(~(gamma > 0)):
        raise ValueError("node weights must be positive")
    if abs(gamma.sum() - n) > 1e-9 * n:
        raise ValueError(
            f"node weights must sum to n={n} (got {gamma.sum()!r}); "
            "use weights_from_degrees or rescale by n / sum(gamma)"
        )
    return gamma


def kmeans(points, K, seed=0, n_init=10, max_iter=300):
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` runs.

    Returns
    -------
    labels : (n,) int array
    centroids : (K, m) array
    """
    X = check_array(points, dtype=np.float64)
    if X.shape[0] < K:
        raise ValueError(f"need at least K={K} points, got {X.shape[0]}")
    km = KMeans(
        n_clusters=K, init="k-means++", n_init=n_init, max_iter=max_iter,
        algorithm="lloyd", random_state=seed,
    ).fit(X)
    return km.labels_.astype(np.int64), km.cluster_centers_


def _regularise(C):
    m = C.shape[0]
    C = (C + C.T) / 2
    if np.linalg.eigvalsh(C)[0] < EIG_FLOOR:
        scale = np.trace(C) / m
        if not scale > 0:
            scale = 1.0
        C = C + REG_SCALE * scale * np.eye(m)
    return C


def _cholesky(C, k):
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        raise CovarianceCollapseError(f"covariance of component {k} is not positive definite")


def _log_component_densities(X, gamma, mu, C):
    """``log f(X_i; mu_k, C_k / gamma_i)`` as an (n, K) array."""
    n, m = X.shape
    K = mu.shape[0]
    out = np.empty((n, K))
    half_m_log_gamma = 0.5 * m * np.log(gamma)
    for k in range(K):
        L = _cholesky(C[k], k)
        diff = X - mu[k]
        sol = np.linalg.solve(L, diff.T)
        maha = np.einsum("ij,ij->j", sol, sol)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, k] = -0.5 * (m * LOG_2PI + logdet) + half_m_log_gamma - 0.5 * gamma * maha
    return out


def weighted_loglik(points, gamma, alpha, mu, C):
    """``sum_i log sum_k alpha_k f(X_i; mu_k, C_k / gamma_i)``."""
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    gamma = np.asarray(gamma, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    mu = np.asarray(mu, dtype=float).reshape(alpha.size, X.shape[1])
    C = np.asarray(C, dtype=float).reshape(alpha.size, X.shape[1], X.shape[1])
    with np.errstate(divide="ignore"):
        log_alpha = np.log(alpha)
    return float(logsumexp(_log_component_densities(X, gamma, mu, C) + log_alpha, axis=1).sum())


def _reseed_empty(beta):
    """Give each empty component the point whose best responsibility is lowest."""
    mass = beta.sum(axis=0)
    empty = np.flatnonzero(mass < EMPTY_TOL)
    if not empty.size:
        return beta
    beta = beta.copy()
    taken = set()
    for k in empty:
        # stable order: lowest max-responsibility, then lowest index
        order = np.argsort(beta.max(axis=1), kind="stable")
        i = next(int(i) for i in order if int(i) not in taken)
        taken.add(i)
        beta[i] = 0.0
        beta[i, k] = 1.0
    return beta


def _m_step(X, gamma, beta):
    n, m = X.shape
    beta = _reseed_empty(beta)
    mass = beta.sum(axis=0)
    wbeta = beta * gamma[:, None]
    alpha = mass / n
    # weighted-mean maximiser; equals sum(beta*gamma*X)/sum(beta) when
    # sum(beta*gamma) == sum(beta), e.g. K = 1 with sum(gamma) = n
    mu = (wbeta.T @ X) / wbeta.sum(axis=0)[:, None]
    C = np.empty((mu.shape[0], m, m))
    for k in range(mu.shape[0]):
        diff = X - mu[k]
        C[k] = _regularise((wbeta[:, k, None] * diff).T @ diff / mass[k])
    return alpha, mu, C


def wgmm_em(points, gamma, K, seed=0, max_iter=200, rel_tol=1e-8, n_init=10, init_labels=None):
    """Fit a weighted Gaussian mixture by expectation-maximisation.

    Responsibilities start as the hard assignments of k-means (or
    ``init_labels``); the loop then alternates M-step and E-step until the
    relative change in log-likelihood drops below ``rel_tol``.

    Parameters
    ----------
    points : (n, m) array
    gamma : (n,) array
        Positive node weights summing to ``n``.
    K : int
        Number of components.
    seed : int
        Seed for the k-means initialisation.

    Returns
    -------
    MixtureFit
    """
    X = check_array(points, dtype=np.float64)
    n, m = X.shape
    if n < K:
        raise ValueError(f"need at least K={K} points, got {n}")
    gamma = check_node_weights(gamma, n)
    if init_labels is None:
        init_labels, _ = kmeans(X, K, seed=seed, n_init=n_init)
    init_labels = np.asarray(init_labels)
    beta = np.zeros((n, K))
    beta[np.arange(n), init_labels] = 1.0

    trace = []
    converged = False
    for it in range(max_iter):
        alpha, mu, C = _m_step(X, gamma, beta)
        with np.errstate(divide="ignore"):
            log_joint = _log_component_densities(X, gamma, mu, C) + np.log(alpha)
        log_norm = logsumexp(log_joint, axis=1)
        ll = float(log_norm.sum())
        beta = np.exp(log_joint - log_norm[:, None])
        trace.append(ll)
        if it > 0 and abs(ll - trace[-2]) <= rel_tol * abs(ll):
            converged = True
            break
    return MixtureFit(
        alpha=alpha, mu=mu, C=C, beta=beta,
        labels=np.argmax(beta, axis=1),
        loglik_trace=np.array(trace), gamma=gamma,
        converged=converged, n_iter=len(trace),
    )


def gmm_em(points, K, seed=0, max_iter=200, rel_tol=1e-8, n_init=10, init_labels=None):
    """Standard Gaussian mixture EM (unit node weights)."""
    X = check_array(points, dtype=np.float64)
    return wgmm_em(
        X, np.ones(X.shape[0]), K, seed=seed, max_iter=max_iter,
        rel_tol=rel_tol, n_init=n_init, init_labels=init_labels,
    )


class WeightedGaussianMixture(ClusterMixin, BaseEstimator):
    """Gaussian mixture with per-point precision weights.

    ``sample_weight`` passed to :meth:`fit` plays the role of node weights;
    it is rescaled to sum to the number of points. Omitting it gives an
    ordinary full-covariance Gaussian mixture.

    Parameters
    ----------
    n_components : int
    max_iter : int
    tol : float
        Relative log-likelihood change used as the stopping rule.
    n_init : int
        k-means restarts used for initialisation.
    random_state : int
    """

    def __init__(self, n_components=2, max_iter=200, tol=1e-8, n_init=10, random_state=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.random_state = random_state

    @staticmethod
    def _weights(X, sample_weight):
        n = X.shape[0]
        if sample_weight is None:
            return np.ones(n)
        w = np.asarray(sample_weight, dtype=float).ravel()
        if w.shape != (n,) or np.any(~(w > 0)):
            raise ValueError("sample_weight must hold one positive value per sample")
        return w * (n / w.sum())

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=np.float64)
        fit = wgmm_em(
            X, self._weights(X, sample_weight), self.n_components,
            seed=self.random_state, max_iter=self.max_iter,
            rel_tol=self.tol, n_init=self.n_init,
        )
        self.weights_ = fit.alpha
        self.means_ = fit.mu
        self.covariances_ = fit.C
        self.labels_ = fit.labels
        self.loglik_trace_ = fit.loglik_trace
        self.converged_ = fit.converged
        self.n_iter_ = fit.n_iter
        self.fit_ = fit
        return self

    def fit_predict(self, X, y=None, sample_weight=None):
        return self.fit(X, sample_weight=sample_weight).labels_

    def _log_joint(self, X, sample_weight):
        check_is_fitted(self, "means_")
        X = check_array(X, dtype=np.float64)
        gamma = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, float)
        with np.errstate(divide="ignore"):
            return _log_component_densities(
                X, gamma, self.means_, self.covariances_
            ) + np.log(self.weights_)

    def predict_proba(self, X, sample_weight=None):
        """Responsibilities; ``sample_weight`` are raw (unnormalised) weights."""
        lj = self._log_joint(X, sample_weight)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def predict(self, X, sample_weight=None):
        return np.argmax(self._log_joint(X, sample_weight), axis=1)

    def score(self, X, y=None, sample_weight=None):
        """Mean per-point log-likelihood."""
        return float(logsumexp(self._log_joint(X, sample_weight), axis=1).mean())
