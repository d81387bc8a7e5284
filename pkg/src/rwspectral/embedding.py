"""Spectral embeddings (RWSE, ASE, LSE) and degree-correction transforms."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .graph import check_adjacency, check_connected
from .spectral import (
    DEFAULT_TOL,
    rw_eigenpairs,
    top_eigenpairs_by_magnitude,
)

RANK_TOL = 1e-10
VARIANTS = ("rwse", "rwse_plus", "ase", "lse")
CORRECTIONS = ("none", "spherical", "score")


class RankDeficiencyError(ValueError):
    """Requested dimension uses an eigenvalue that is numerically zero."""

    def __init__(self, d, values):
        self.d = d
        self.values = np.asarray(values)
        rank = int(np.sum(np.abs(self.values) > RANK_TOL))
        super().__init__(
            f"requested dimension {d} but only {rank} of the leading eigenvalues "
            f"exceed {RANK_TOL:g} in magnitude: {self.values}"
        )


@dataclass(frozen=True)
class Embedding:
    """Node representations plus how they were obtained."""

    points: np.ndarray
    variant: str
    eigenvalues: np.ndarray
    correction: str = "none"

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def m(self):
        return self.points.shape[1]


def _check_rank(values, d):
    if np.any(np.abs(values) <= RANK_TOL):
        raise RankDeficiencyError(d, values)


def _check_dim(graph, d, lower=1):
    if not lower <= d <= graph.n:
        raise ValueError(f"dimension must satisfy {lower} <= d <= n={graph.n}, got {d}")


def _rw_plus_points(graph, d, tol, seed):
    pairs = rw_eigenpairs(graph, d, tol=tol, seed=seed)
    _check_rank(pairs.values, d)
    scale = np.sqrt(np.abs(pairs.values))
    return pairs, pairs.canonical * scale


def rwse(graph, d, tol=DEFAULT_TOL, seed=0):
    """Random walk spectral embedding into R^{d-1}.

    Uses canonical eigenvectors 2..d of ``D^{-1} A`` scaled by
    ``|lambda|^{1/2}``; the trivial constant eigenvector is omitted.
    """
    graph = check_adjacency(graph, require_no_isolated=True)
    _check_dim(graph, d, lower=2)
    pairs, points = _rw_plus_points(graph, d, tol, seed)
    return Embedding(points[:, 1:], "rwse", pairs.values[1:])


def rwse_plus(graph, d, tol=DEFAULT_TOL, seed=0):
    """RWSE with the trivial column ``1 / sqrt(sum(degrees))`` prepended."""
    graph = check_adjacency(graph, require_no_isolated=True)
    _check_dim(graph, d)
    pairs, points = _rw_plus_points(graph, d, tol, seed)
    return Embedding(points, "rwse_plus", pairs.values)


def lse(graph, d, tol=DEFAULT_TOL, seed=0):
    """Symmetric Laplacian spectral embedding (leading eigenvector kept).

    Shares its eigenvectors with :func:`rwse_plus`, so
    ``rwse_plus(g, d).points == D^{-1/2} lse(g, d).points`` up to rounding.
    """
    graph = check_adjacency(graph, require_no_isolated=True)
    _check_dim(graph, d)
    pairs = rw_eigenpairs(graph, d, tol=tol, seed=seed)
    _check_rank(pairs.values, d)
    points = pairs.vectors * np.sqrt(np.abs(pairs.values))
    return Embedding(points, "lse", pairs.values)


def ase(graph, d, tol=DEFAULT_TOL, seed=0):
    """Adjacency spectral embedding from the ``d`` largest-|lambda| pairs."""
    graph = check_adjacency(graph, require_no_isolated=True)
    _check_dim(graph, d)
    pairs = top_eigenpairs_by_magnitude(graph.adjacency, d, tol=tol, seed=seed)
    _check_rank(pairs.values, d)
    points = pairs.vectors * np.sqrt(np.abs(pairs.values))
    return Embedding(points, "ase", pairs.values)


def spherical_projection(emb):
    """Divide each row by its Euclidean norm; zero rows are an error."""
    points = emb.points if isinstance(emb, Embedding) else np.asarray(emb, float)
    norms = np.linalg.norm(points, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"cannot project zero-norm rows onto the sphere: nodes {zero[:20]}")
    out = points / norms[:, None]
    if isinstance(emb, Embedding):
        return replace(emb, points=out, correction="spherical")
    return out


def score_ratios(vectors, threshold=None):
    """Entrywise ratios ``vectors[:, 1:] / vectors[:, :1]``, clipped to
    ``[-threshold, threshold]`` (default ``log n``)."""
    vectors = np.asarray(vectors, dtype=float)
    lead = vectors[:, 0]
    zero = np.flatnonzero(lead == 0)
    if zero.size:
        raise ValueError(f"leading eigenvector has zero entries at nodes {zero[:20]}")
    if threshold is None:
        threshold = np.log(vectors.shape[0])
    return np.clip(vectors[:, 1:] / lead[:, None], -threshold, threshold)


def score_correction(graph, K, tol=DEFAULT_TOL, seed=0):
    """SCORE: ratios of adjacency eigenvectors 2..K to the leading one."""
    graph = check_adjacency(graph, require_no_isolated=True)
    _check_dim(graph, K, lower=2)
    pairs = top_eigenpairs_by_magnitude(graph.adjacency, K, tol=tol, seed=seed)
    return Embedding(score_ratios(pairs.vectors), "ase", pairs.values, "score")


def embed(graph, d, matrix="rw", correction="none", tol=DEFAULT_TOL, seed=0):
    """Dispatch on the matrix name used by the CLI.

    ``matrix`` is one of ``rw`` (RWSE, d-1 columns), ``rw+``, ``adj`` or
    ``sym``; ``correction`` is ``none``, ``sphere``/``spherical`` or
    ``score`` (adjacency only).
    """
    correction = {"sphere": "spherical"}.get(correction, correction)
    if correction not in CORRECTIONS:
        raise ValueError(f"unknown correction {correction!r}")
    if correction == "score":
        if matrix != "adj":
            raise ValueError("score correction is defined for the adjacency matrix only")
        return score_correction(graph, d, tol=tol, seed=seed)
    funcs = {"rw": rwse, "rw+": rwse_plus, "adj": ase, "sym": lse}
    try:
        func = funcs[matrix]
    except KeyError:
        raise ValueError(f"unknown matrix {matrix!r}; choose from {sorted(funcs)}")
    emb = func(graph, d, tol=tol, seed=seed)
    if correction == "spherical":
        emb = spherical_projection(emb)
    return emb


class _GraphEmbedding(TransformerMixin, BaseEstimator):
    """Shared estimator plumbing: ``fit`` takes an adjacency matrix."""

    _matrix = None

    @property
    def _correction(self):
        return self.correction

    def __init__(self, n_components=2, correction="none", tol=DEFAULT_TOL, random_state=0):
        self.n_components = n_components
        self.correction = correction
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        """Embed the graph with adjacency matrix ``X``."""
        graph = check_adjacency(X, require_no_isolated=True)
        check_connected(graph)
        emb = embed(
            graph, self.n_components, self._matrix, self._correction,
            tol=self.tol, seed=self.random_state,
        )
        self.embedding_ = emb.points
        self.eigenvalues_ = emb.eigenvalues
        self.degrees_ = graph.degrees
        self.n_features_in_ = graph.n
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        """Return the stored embedding; embeddings are transductive."""
        check_is_fitted(self, "embedding_")
        graph = check_adjacency(X)
        if graph.n != self.n_features_in_:
            raise ValueError("transform expects the graph passed to fit")
        return self.embedding_


class RandomWalkEmbedding(_GraphEmbedding):
    """Random walk spectral embedding.

    Parameters
    ----------
    n_components : int
        The dimension ``d``; the output has ``d - 1`` columns unless
        ``include_trivial`` is set.
    include_trivial : bool
        Prepend the constant column ``1 / sqrt(sum(degrees))``.
    """

    def __init__(self, n_components=2, include_trivial=False, tol=DEFAULT_TOL, random_state=0):
        self.n_components = n_components
        self.include_trivial = include_trivial
        self.tol = tol
        self.random_state = random_state

    _correction = "none"

    @property
    def _matrix(self):
        return "rw+" if self.include_trivial else "rw"


class AdjacencyEmbedding(_GraphEmbedding):
    """Adjacency spectral embedding, optionally with SCORE or spherical correction."""

    _matrix = "adj"


class LaplacianEmbedding(_GraphEmbedding):
    """Symmetric Laplacian spectral embedding, optionally sphere-projected."""

    _matrix = "sym"


__all__ = [
    "AdjacencyEmbedding",
    "Embedding",
    "LaplacianEmbedding",
    "RandomWalkEmbedding",
    "RankDeficiencyError",
    "ase",
    "embed",
    "lse",
    "rwse",
    "rwse_plus",
    "score_correction",
    "score_ratios",
    "spherical_projection",
]
