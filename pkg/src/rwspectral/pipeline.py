"""Embed, degree-correct, cluster: the three-step spectral clustering recipe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .clustering import gmm_em, kmeans, weights_from_degrees, wgmm_em
from .embedding import ase, lse, rwse, score_correction, spherical_projection
from .graph import check_adjacency, check_connected

EMBEDDINGS = ("rwse", "ase", "lse")
CORRECTIONS = ("none", "spherical", "score")
CLUSTERERS = ("kmeans", "gmm", "wgmm")


@dataclass(frozen=True)
class Pipeline:
    embedding: str = "rwse"
    correction: str = "none"
    clusterer: str = "wgmm"

    def __post_init__(self):
        if self.embedding not in EMBEDDINGS:
            raise ValueError(f"embedding must be one of {EMBEDDINGS}")
        if self.correction not in CORRECTIONS:
            raise ValueError(f"correction must be one of {CORRECTIONS}")
        if self.clusterer not in CLUSTERERS:
            raise ValueError(f"clusterer must be one of {CLUSTERERS}")
        if self.correction == "score" and self.embedding != "ase":
            raise ValueError("score correction applies to the adjacency embedding")

    @property
    def name(self):
        return f"{self.embedding}-{self.correction}-{self.clusterer}"

    @classmethod
    def parse(cls, spec):
        """Accept ``"rwse-none-wgmm"``, a 3-sequence or a mapping."""
        if isinstance(spec, Pipeline):
            return spec
        if isinstance(spec, str):
            return cls(*spec.split("-"))
        if isinstance(spec, dict):
            return cls(**spec)
        return cls(*spec)


# Figure 3: clusterers on RWSE. Figure 4: RWSE+WGMM against the baselines.
CLUSTERING_PIPELINES = tuple(
    Pipeline("rwse", "none", c) for c in ("kmeans", "gmm", "wgmm")
)
METHOD_PIPELINES = (
    Pipeline("rwse", "none", "wgmm"),
    Pipeline("ase", "score", "kmeans"),
    Pipeline("ase", "spherical", "kmeans"),
    Pipeline("lse", "spherical", "kmeans"),
)


def embed_points(graph, d, pipeline, seed=0):
    if pipeline.correction == "score":
        return score_correction(graph, d, seed=seed).points
    emb = {"rwse": rwse, "ase": ase, "lse": lse}[pipeline.embedding](graph, d, seed=seed)
    if pipeline.correction == "spherical":
        emb = spherical_projection(emb)
    return emb.points


def cluster_points(points, K, clusterer, degrees=None, seed=0):
    if clusterer == "kmeans":
        return kmeans(points, K, seed=seed)[0]
    if clusterer == "gmm":
        return gmm_em(points, K, seed=seed).labels
    if degrees is None:
        raise ValueError("wgmm needs node degrees")
    return wgmm_em(points, weights_from_degrees(degrees), K, seed=seed).labels


def run_pipeline(graph, d, K, pipeline, seed=0, points=None):
    """Community labels for a connected graph.

    ``points`` may carry a precomputed embedding to share it between
    pipelines that differ only in the clustering step.
    """
    if K < d:
        raise ValueError(f"need K >= d, got K={K}, d={d}")
    pipeline = Pipeline.parse(pipeline)
    if points is None:
        points = embed_points(graph, d, pipeline, seed=seed)
    return cluster_points(points, K, pipeline.clusterer, graph.degrees, seed=seed)


class DegreeCorrectedSpectralClustering(ClusterMixin, BaseEstimator):
    """Spectral clustering for degree-heterogeneous community graphs.

    Parameters
    ----------
    n_clusters : int
        Number of communities ``K``.
    n_components : int, optional
        Embedding dimension ``d`` (defaults to ``n_clusters``; must not
        exceed it).
    embedding : {"rwse", "ase", "lse"}
    correction : {"none", "spherical", "score"}
    clusterer : {"kmeans", "gmm", "wgmm"}
    random_state : int
    """

    def __init__(self, n_clusters=2, n_components=None, embedding="rwse",
                 correction="none", clusterer="wgmm", random_state=0):
        self.n_clusters = n_clusters
        self.n_components = n_components
        self.embedding = embedding
        self.correction = correction
        self.clusterer = clusterer
        self.random_state = random_state

    def fit(self, X, y=None):
        """Cluster the nodes of the graph with adjacency matrix ``X``."""
        graph = check_connected(check_adjacency(X, require_no_isolated=True))
        d = self.n_clusters if self.n_components is None else self.n_components
        pipeline = Pipeline(self.embedding, self.correction, self.clusterer)
        self.embedding_ = embed_points(graph, d, pipeline, seed=self.random_state)
        self.labels_ = np.asarray(
            run_pipeline(graph, d, self.n_clusters, pipeline,
                         seed=self.random_state, points=self.embedding_)
        )
        return self
