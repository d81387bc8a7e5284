"""Spectral clustering with the random walk Laplacian."""

__version__ = "0.1.0"

from .clustering import (  # noqa: E402
    MixtureFit,
    WeightedGaussianMixture,
    gmm_em,
    kmeans,
    weighted_loglik,
    weights_from_degrees,
    wgmm_em,
)
from .embedding import (  # noqa: E402
    AdjacencyEmbedding,
    Embedding,
    LaplacianEmbedding,
    RandomWalkEmbedding,
    ase,
    lse,
    rwse,
    rwse_plus,
    score_correction,
    spherical_projection,
)
from .graph import Graph, connected_components  # noqa: E402
from .model import (  # noqa: E402
    DcsbmModel,
    Signature,
    WeightDist,
    degree_corrected_positions,
    expected_degrees,
    latent_from_B,
    sample_dcsbm,
    sample_grdpg,
)
from .pipeline import DegreeCorrectedSpectralClustering  # noqa: E402
from .spectral import rw_eigenpairs, sym_laplacian, top_eigenpairs_by_magnitude  # noqa: E402

__all__ = [
    "AdjacencyEmbedding",
    "DcsbmModel",
    "DegreeCorrectedSpectralClustering",
    "Embedding",
    "Graph",
    "LaplacianEmbedding",
    "MixtureFit",
    "RandomWalkEmbedding",
    "Signature",
    "WeightDist",
    "WeightedGaussianMixture",
    "ase",
    "connected_components",
    "degree_corrected_positions",
    "expected_degrees",
    "gmm_em",
    "kmeans",
    "latent_from_B",
    "lse",
    "rw_eigenpairs",
    "rwse",
    "rwse_plus",
    "sample_dcsbm",
    "sample_grdpg",
    "score_correction",
    "spherical_projection",
    "sym_laplacian",
    "top_eigenpairs_by_magnitude",
    "weighted_loglik",
    "weights_from_degrees",
    "wgmm_em",
]
