"""Computable asymptotics for the random walk spectral embedding.

Covariances here describe the limiting law of
``n^{3/2} rho (M @ Xplus_i - Xtilde_i)``, where ``Xtilde_i = X_i / t_i`` is the
degree-corrected latent position and ``M`` aligns the embedding with the
latent frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .model import Signature, as_generator

SINGULAR_COND = 1e12
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class PopulationMoments:
    """``mu = E(xi)``, ``Delta = E(xi xi^T / mu^T I xi)`` and, for a DC-SBM,
    ``omega_l = sum_m pi_m E(theta_m) B_lm``."""

    mu: np.ndarray
    Delta: np.ndarray
    signature: Signature
    source: str
    omega: np.ndarray | None = None
    mc_samples: int | None = None


@dataclass(frozen=True)
class CltCovariance:
    """A limiting error covariance and the context it applies to."""

    Sigma: np.ndarray
    regime: str
    context: tuple
    scaling: str = "n^{3/2} rho"
    stderr: np.ndarray | None = field(default=None, repr=False)

    @property
    def rank(self):
        ev = np.linalg.eigvalsh(self.Sigma)
        top = max(abs(ev[-1]), abs(ev[0]))
        if top == 0:
            return 0
        return int(np.sum(np.abs(ev) > RANK_RTOL * top))


@dataclass(frozen=True)
class AlignmentMap:
    """Linear map ``M`` with ``embedding @ M.T ~ targets``."""

    M: np.ndarray
    fit_residual: float
    indefinite_orthogonality_residual: float | None

    def apply(self, points):
        return np.asarray(points) @ self.M.T


def _check_regime(regime):
    if regime not in ("dense", "sparse"):
        raise ValueError(f"regime must be 'dense' or 'sparse', got {regime!r}")


def _inverse(Delta):
    if not np.isfinite(np.linalg.cond(Delta)) or np.linalg.cond(Delta) > SINGULAR_COND:
        raise np.linalg.LinAlgError("Delta is singular")
    return np.linalg.inv(Delta)


def _symmetrise(S):
    return (S + S.T) / 2


def dcsbm_moments(model, latent=None):
    """Exact population moments of a DC-SBM from the weight moments."""
    latent = model.latent if latent is None else latent
    v = latent.v
    Etheta = model.weight_means
    mass = model.pi * Etheta
    omega = model.B @ mass
    if np.any(omega == 0):
        raise ValueError(f"omega has zero entries: {omega}")
    mu = v.T @ mass
    Delta = _symmetrise((v * (mass / omega)[:, None]).T @ v)
    return PopulationMoments(
        mu=mu, Delta=Delta, signature=latent.signature, source="dcsbm-exact", omega=omega
    )


def clt_cov_dcsbm(model, k, w, regime=None, moments=None):
    """Limiting covariance for a DC-SBM node in community ``k`` with weight ``w``.

    In the dense regime each community term carries
    ``B_kl E(theta_l) - w B_kl^2 E(theta_l^2)``; the sparse regime keeps the
    first part only.
    """
    regime = model.regime if regime is None else regime
    _check_regime(regime)
    if not 0 < w <= 1:
        raise ValueError(f"weight must lie in (0, 1], got {w}")
    moments = dcsbm_moments(model) if moments is None else moments
    latent = model.latent
    v, Ipq = latent.v, latent.signature.diag
    omega = moments.omega
    Dinv = _inverse(moments.Delta)
    shift = moments.Delta @ (Ipq * v[k]) / omega[k]
    Bk = model.B[k]
    factor = Bk * model.weight_means
    if regime == "dense":
        factor = factor - w * Bk**2 * model.weight_second_moments
    d = v.shape[1]
    Sigma = np.zeros((d, d))
    for l in range(model.K):
        a = Ipq * (Dinv @ (v[l] / omega[l] - shift))
        Sigma += model.pi[l] * factor[l] * np.outer(a, a)
    Sigma /= w * omega[k] ** 2
    return CltCovariance(_symmetrise(Sigma), regime, ("community", int(k), float(w)))


def _mc_chunks(sampler, mc_samples, seed, chunk):
    """Deterministic chunked draws; each chunk has its own stream."""
    ss = np.random.SeedSequence(seed)
    n_chunks = -(-mc_samples // chunk)
    children = ss.spawn(n_chunks)
    for c, child in enumerate(children):
        size = min(chunk, mc_samples - c * chunk)
        yield np.asarray(sampler(np.random.default_rng(child), size), dtype=float)


def clt_cov_grdpg(x, sampler, signature, regime, mc_samples=100_000, seed=0, chunk=50_000):
    """Monte-Carlo estimate of the limiting covariance at latent position ``x``.

    ``sampler(rng, size)`` must return a ``(size, d)`` array of draws from
    the latent distribution. ``mu`` and ``Delta`` are estimated from the
    same draws; the reported standard errors treat them as fixed.
    """
    _check_regime(regime)
    if mc_samples < 10_000:
        raise ValueError("mc_samples must be at least 1e4")
    x = np.asarray(x, dtype=float)
    Ipq = signature.diag
    total = np.zeros(signature.d)
    for xi in _mc_chunks(sampler, mc_samples, seed, chunk):
        total += xi.sum(axis=0)
    mu = total / mc_samples
    scale = mu @ (Ipq * x)
    if not scale > 0:
        raise ValueError(f"mu^T I x must be positive, got {scale!r}")
    Delta = np.zeros((signature.d, signature.d))
    for xi in _mc_chunks(sampler, mc_samples, seed, chunk):
        Delta += (xi / (xi @ (Ipq * mu))[:, None]).T @ xi
    Delta = _symmetrise(Delta / mc_samples)
    Dinv = _inverse(Delta)
    shift = Delta @ (Ipq * x) / scale
    s1 = np.zeros((signature.d, signature.d))
    s2 = np.zeros_like(s1)
    for xi in _mc_chunks(sampler, mc_samples, seed, chunk):
        inner = xi @ (Ipq * x)
        c = inner if regime == "sparse" else inner * (1 - inner)
        a = (xi / (xi @ (Ipq * mu))[:, None] - shift) @ Dinv.T * Ipq
        per = c[:, None, None] * a[:, :, None] * a[:, None, :] / scale**2
        s1 += per.sum(axis=0)
        s2 += (per**2).sum(axis=0)
    Sigma = s1 / mc_samples
    var = np.maximum(s2 / mc_samples - Sigma**2, 0.0)
    stderr = np.sqrt(var / (mc_samples - 1))
    return CltCovariance(
        _symmetrise(Sigma), regime, ("position", tuple(x.tolist())), stderr=stderr
    )


def mixture_sampler(model):
    """Sampler for the DC-SBM latent distribution ``xi = theta * v[z]``."""
    v = model.latent.v

    def sample(rng, size):
        z = rng.choice(model.K, size=size, p=model.pi)
        theta = np.empty(size)
        for k in range(model.K):
            idx = np.flatnonzero(z == k)
            theta[idx] = model.weights[k].sample(rng, idx.size)
        return theta[:, None] * v[z]

    return sample


def empirical_centers(sample, model):
    """Per-community centres ``rho^{-1/2} v_k / sum_j w_j B[k, z_j]``."""
    if sample.z is None or sample.w is None:
        raise ValueError("sample carries no community labels / weights")
    weight_sums = np.bincount(sample.z, weights=sample.w, minlength=model.K)
    denom = model.B @ weight_sums
    if np.any(denom == 0):
        raise ValueError(f"zero denominator for communities {np.flatnonzero(denom == 0)}")
    return model.latent.v / denom[:, None] / np.sqrt(sample.rho)


def align(embedding, targets, signature=None):
    """Least-squares alignment ``M = argmin ||embedding @ M.T - targets||_F``.

    When ``signature`` is given, ``||M^T I_pq M - I_pq||_F`` is reported as a
    diagnostic of how far ``M`` is from the indefinite orthogonal group.
    """
    E = np.asarray(embedding, dtype=float)
    T = np.asarray(targets, dtype=float)
    if E.shape != T.shape:
        raise ValueError(f"shape mismatch {E.shape} vs {T.shape}")
    d = E.shape[1]
    for name, Z in (("embedding", E), ("targets", T)):
        if np.linalg.matrix_rank(Z) < d:
            raise np.linalg.LinAlgError(f"{name} is rank deficient")
    Mt, *_ = np.linalg.lstsq(E, T, rcond=None)
    M = Mt.T
    fit = float(np.sqrt(np.mean(np.sum((E @ Mt - T) ** 2, axis=1))))
    ortho = None
    if signature is not None:
        Ipq = signature.matrix
        ortho = float(np.linalg.norm(M.T @ Ipq @ M - Ipq))
    return AlignmentMap(M=M, fit_residual=fit, indefinite_orthogonality_residual=ortho)


def oracle_alignment(vectors, values, degrees, X, t, signature):
    """Alignment built from the graph and the true latent positions.

    The population matrix ``T^{-1/2} X I X^T T^{-1/2}`` has eigenvectors
    ``U`` with ``U |S|^{1/2} = T^{-1/2} X G`` for an invertible ``G``. Sample
    eigenvectors ``vectors`` (orthonormal, of ``L_sym``) are rotated onto
    ``U`` by orthogonal Procrustes, so that ``Xplus @ M.T ~ X / t`` where
    ``Xplus = D^{-1/2} vectors |values|^{1/2}``.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(t, dtype=float)
    d = X.shape[1]
    Xbar = X / np.sqrt(t)[:, None]
    Qx, Rx = np.linalg.qr(Xbar)
    S, V = np.linalg.eigh((Rx * signature.diag) @ Rx.T)
    order = np.lexsort((-S, -np.abs(S)))
    S, V = S[order], V[:, order]
    if np.any(np.abs(S) <= 1e-12 * np.abs(S).max()):
        raise np.linalg.LinAlgError("population matrix is rank deficient")
    U = Qx @ V
    G = np.linalg.solve(Rx, V * np.sqrt(np.abs(S)))
    a, _, bt = np.linalg.svd(np.asarray(vectors)[:, :d].T @ U)
    Mt = (a @ bt) @ np.linalg.inv(G)
    M = Mt.T
    Xplus = np.asarray(vectors)[:, :d] * np.sqrt(np.abs(values[:d])) / np.sqrt(degrees)[:, None]
    fit = float(np.sqrt(np.mean(np.sum((Xplus @ Mt - X / t[:, None]) ** 2, axis=1))))
    Ipq = signature.matrix
    ortho = float(np.linalg.norm(M.T @ Ipq @ M - Ipq))
    return AlignmentMap(M=M, fit_residual=fit, indefinite_orthogonality_residual=ortho)


def chi2_quantile(level, dof=2):
    return float(stats.chi2.ppf(level, dof))


def ellipse_level_set(Sigma2, center, level=0.95, n_points=100):
    """Boundary of the ``level`` probability region of ``N(center, Sigma2)``.

    Returns an ``(n_points, 2)`` closed polyline (first point repeated last).
    """
    S = np.asarray(Sigma2, dtype=float)
    if S.shape != (2, 2) or not np.allclose(S, S.T):
        raise ValueError("Sigma2 must be a symmetric 2x2 matrix")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    vals, vecs = np.linalg.eigh(S)
    if vals[0] < -1e-12 * max(abs(vals[-1]), 1.0):
        raise ValueError(f"Sigma2 is not positive semi-definite: eigenvalues {vals}")
    root = vecs @ np.diag(np.sqrt(np.clip(vals, 0, None))) @ vecs.T
    r = np.sqrt(chi2_quantile(level, 2))
    theta = np.linspace(0, 2 * np.pi, n_points)
    circle = np.column_stack([np.cos(theta), np.sin(theta)])
    return np.asarray(center, dtype=float) + r * circle @ root.T


def hyperplane_frame(moments):
    """Orthonormal basis whose first axis is the hyperplane normal ``I mu``.

    Limiting errors are orthogonal to ``I mu`` (``Sigma I mu = 0``), so in
    this frame they have no first coordinate.
    """
    normal = moments.signature.diag * moments.mu
    d = normal.size
    Q, R = np.linalg.qr(np.column_stack([normal, np.eye(d)]))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def figure_theory(model, n, weights=(0.25, 0.5, 0.75, 1.0), level=0.95,
                  regimes=("dense", "sparse"), n_points=100):
    """Population centres and error ellipses in hyperplane coordinates 2..d.

    Centres are ``rho^{-1/2} v_k / (n omega_k)`` (the large-n value of the
    empirical centres) and covariances are rescaled by ``(n^{3/2} rho)^{-2}``.
    """
    moments = dcsbm_moments(model)
    R = hyperplane_frame(moments)
    centres = model.latent.v / (n * moments.omega[:, None]) / np.sqrt(model.rho)
    proj_centres = (centres @ R)[:, 1:]
    scale = 1.0 / (n**1.5 * model.rho) ** 2
    covs, ellipses = [], []
    for regime in regimes:
        for k in range(model.K):
            for w in weights:
                cov = clt_cov_dcsbm(model, k, w, regime=regime, moments=moments)
                S = (R.T @ cov.Sigma @ R)[1:, 1:] * scale
                covs.append({"regime": regime, "community": k, "weight": w,
                             "Sigma": cov.Sigma, "Sigma_plane": S, "rank": cov.rank})
                if S.shape == (2, 2):
                    ellipses.append(((regime, k, w),
                                     ellipse_level_set(S, proj_centres[k], level, n_points)))
    return {"moments": moments, "frame": R, "centres": proj_centres,
            "covariances": covs, "ellipses": ellipses}
