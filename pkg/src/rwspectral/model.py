"""Generative random graph models: GRDPG and degree-corrected SBM.

Latent positions live in R^d with the indefinite inner product
``x @ I_pq @ y``. A DC-SBM node in community ``k`` with weight ``w`` sits at
``sqrt(rho) * w * v[k]`` where the community representatives ``v`` factorise
the block matrix, ``B = v @ I_pq @ v.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .graph import Graph

RANK_TOL = 1e-12

# Block matrices used in the experiments.
B_EQ10 = np.array([[0.08, 0.06, 0.06], [0.06, 0.10, 0.06], [0.06, 0.06, 0.12]])
B_EQB2 = np.array([[0.4, 0.35, 0.35], [0.35, 0.5, 0.35], [0.35, 0.35, 0.6]])
B_EQB3 = np.array([[0.3, 0.4, 0.6], [0.4, 0.3, 0.5], [0.6, 0.5, 0.3]])
B_PRESETS = {"eq10": B_EQ10, "eqB2": B_EQB2, "eqB3": B_EQB3}


def as_generator(seed):
    """Return a numpy Generator from an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replicate_seed(seed, *key):
    """Independent RNG stream keyed by (master seed, *key)."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))


@dataclass(frozen=True)
class Signature:
    """Signature (p, q) of the indefinite inner product ``I_pq``."""

    p: int
    q: int = 0

    def __post_init__(self):
        if self.p < 1 or self.q < 0:
            raise ValueError(f"invalid signature (p={self.p}, q={self.q})")

    @property
    def d(self):
        return self.p + self.q

    @property
    def diag(self):
        return np.concatenate([np.ones(self.p), -np.ones(self.q)])

    @property
    def matrix(self):
        return np.diag(self.diag)


@dataclass(frozen=True)
class WeightDist:
    """Node weight distribution on (0, 1] with exact moments.

    ``kind`` is one of ``"constant"`` (params ``(c,)``), ``"uniform"``
    (params ``(a, b)``) or ``"discrete"`` (params ``(values, probs)``).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind == "constant":
            (c,) = self.params
            lo, hi = c, c
        elif self.kind == "uniform":
            lo, hi = self.params
            if not lo < hi:
                raise ValueError(f"uniform weights need a < b, got {self.params}")
        elif self.kind == "discrete":
            values, probs = (np.asarray(x, dtype=float) for x in self.params)
            if values.shape != probs.shape or values.ndim != 1 or values.size == 0:
                raise ValueError("discrete weights need matching 1-d values/probs")
            if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0, atol=1e-12):
                raise ValueError("discrete weight probabilities must sum to 1")
            object.__setattr__(self, "params", (tuple(values), tuple(probs)))
            lo, hi = values.min(), values.max()
        else:
            raise ValueError(f"unknown weight distribution kind {self.kind!r}")
        if not (0 < lo and hi <= 1):
            raise ValueError(f"weights must be supported in (0, 1], got {self}")

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", (float(c),))

    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def discrete(cls, values, probs):
        return cls("discrete", (tuple(values), tuple(probs)))

    @property
    def mean(self):
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            a, b = self.params
            return (a + b) / 2
        values, probs = (np.asarray(x) for x in self.params)
        return float(values @ probs)

    @property
    def second_moment(self):
        if self.kind == "constant":
            return self.params[0] ** 2
        if self.kind == "uniform":
            a, b = self.params
            return (a * a + a * b + b * b) / 3
        values, probs = (np.asarray(x) for x in self.params)
        return float(values**2 @ probs)

    @property
    def upper(self):
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "uniform":
            return self.params[1]
        return max(self.params[0])

    def sample(self, rng, size):
        if self.kind == "constant":
            return np.full(size, self.params[0])
        if self.kind == "uniform":
            a, b = self.params
            return rng.uniform(a, b, size)
        values, probs = (np.asarray(x) for x in self.params)
        return values[rng.choice(values.size, size=size, p=probs)]

    def to_dict(self):
        if self.kind == "discrete":
            return {"kind": self.kind, "params": [list(p) for p in self.params]}
        return {"kind": self.kind, "params": list(self.params)}


@dataclass(frozen=True)
class LatentModel:
    """Community representatives ``v`` (K x d) and their signature."""

    signature: Signature
    v: np.ndarray

    def gram(self):
        return self.v @ self.signature.matrix @ self.v.T


@dataclass(frozen=True)
class DcsbmModel:
    """Degree-corrected stochastic block model.

    Parameters
    ----------
    B : (K, K) array
        Symmetric block probability matrix with entries in [0, 1].
    pi : (K,) array
        Community probabilities.
    weights : sequence of WeightDist
        One weight distribution per community.
    rho : float
        Sparsity factor in (0, 1]; edge probabilities are
        ``rho * w_i * w_j * B[z_i, z_j]``.
    regime : {"dense", "sparse"}
        Which asymptotic regime theory computations should assume.
    """

    B: np.ndarray
    pi: np.ndarray
    weights: tuple
    rho: float = 1.0
    regime: str = "dense"
    _latent: LatentModel = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        pi = np.array(self.pi, dtype=float)
        weights = self.weights
        if isinstance(weights, WeightDist):
            weights = (weights,) * B.shape[0]
        weights = tuple(weights)
        _check_block_matrix(B)
        K = B.shape[0]
        if pi.shape != (K,) or np.any(pi < 0) or not np.isclose(pi.sum(), 1.0, atol=1e-12):
            raise ValueError(f"pi must be {K} non-negative probabilities summing to 1")
        if len(weights) != K or not all(isinstance(h, WeightDist) for h in weights):
            raise ValueError(f"need {K} WeightDist instances")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.regime not in ("dense", "sparse"):
            raise ValueError(f"regime must be 'dense' or 'sparse', got {self.regime!r}")
        upper = np.array([h.upper for h in weights])
        if np.any(self.rho * B * np.outer(upper, upper) > 1 + 1e-15):
            raise ValueError("rho * w_i * w_j * B exceeds 1 for admissible weights")
        B.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "_latent", latent_from_B(B))

    @property
    def K(self):
        return self.B.shape[0]

    @property
    def latent(self):
        return self._latent

    @property
    def weight_means(self):
        return np.array([h.mean for h in self.weights])

    @property
    def weight_second_moments(self):
        return np.array([h.second_moment for h in self.weights])

    def to_dict(self):
        return {
            "B": self.B.tolist(),
            "pi": self.pi.tolist(),
            "rho": self.rho,
            "weights": [h.to_dict() for h in self.weights],
            "regime": self.regime,
        }


@dataclass(frozen=True)
class GrdpgSample:
    """A sampled graph together with its latent state."""

    X: np.ndarray
    xi: np.ndarray
    signature: Signature
    t: np.ndarray
    graph: Graph
    rho: float = 1.0
    z: np.ndarray | None = None
    w: np.ndarray | None = None

    @property
    def n(self):
        return self.X.shape[0]

    def restrict(self, nodes):
        """Sample restricted to ``nodes``; expected degrees are recomputed on
        the induced subgraph so the result is itself a valid sample."""
        nodes = np.asarray(nodes, dtype=np.int64)
        X = self.X[nodes]
        return GrdpgSample(
            X=X,
            xi=self.xi[nodes],
            signature=self.signature,
            t=expected_degrees(X, self.signature),
            graph=self.graph.subgraph(nodes),
            rho=self.rho,
            z=None if self.z is None else self.z[nodes],
            w=None if self.w is None else self.w[nodes],
        )


def _check_block_matrix(B):
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
        raise ValueError(f"B must be a non-empty square matrix, got shape {B.shape}")
    if not np.array_equal(B, B.T):
        raise ValueError("B must be symmetric")
    if np.any(B < 0) or np.any(B > 1):
        raise ValueError("entries of B must lie in [0, 1]")


def _fix_signs(V):
    """Flip columns so the entry of largest magnitude is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def latent_from_B(B):
    """Factorise ``B = v @ I_pq @ v.T``.

    The representatives are the rows of ``V |Lambda|^{1/2}`` over the non-zero
    eigenvalues of ``B``; positive eigenvalues come first (matching the
    ``I_pq`` layout), each group ordered by decreasing magnitude.
    """
    B = np.array(B, dtype=float)
    _check_block_matrix(B)
    vals, vecs = np.linalg.eigh(B)
    keep = np.abs(vals) > RANK_TOL
    vals, vecs = vals[keep], vecs[:, keep]
    if vals.size == 0:
        # Zero matrix: keep a single null coordinate so d >= 1.
        return LatentModel(Signature(1, 0), np.zeros((B.shape[0], 1)))
    order = np.lexsort((-np.abs(vals), vals < 0))
    vals, vecs = vals[order], _fix_signs(vecs[:, order])
    p = int(np.sum(vals > 0))
    q = vals.size - p
    if p == 0:
        raise ValueError("B has no positive eigenvalue; no GRDPG representation")
    v = vecs * np.sqrt(np.abs(vals))
    return LatentModel(Signature(p, q), v)


def expected_degrees(X, signature):
    """Expected degrees ``t_i = sum_j X_i @ I_pq @ X_j`` (j = i included)."""
    X = np.asarray(X, dtype=float)
    return X @ (signature.diag * X.sum(axis=0))


def degree_corrected_positions(X, t):
    """Rows ``X_i / t_i``: projective points of the rays through ``X_i``."""
    X = np.asarray(X, dtype=float)
    t = np.asarray(t, dtype=float)
    bad = np.flatnonzero(~(t > 0))
    if bad.size:
        raise ValueError(f"expected degrees must be positive; offending nodes {bad[:10]}")
    return X / t[:, None]


_TARGET_CHUNK = 1 << 22


def _sample_bernoulli_upper(n, prob_rows, rng):
    """Sample a symmetric hollow Bernoulli graph.

    ``prob_rows(r0, r1, c0)`` returns the probability block for rows
    ``r0:r1`` and columns ``c0:n``. Uniform draws cover the upper block of
    each row chunk only; chunking depends on ``n`` alone, so output is
    reproducible for a fixed stream.
    """
    rows_per_chunk = max(1, _TARGET_CHUNK // max(n, 1))
    ii, jj = [], []
    for r0 in range(0, n, rows_per_chunk):
        r1 = min(n, r0 + rows_per_chunk)
        P = prob_rows(r0, r1, r0)
        U = rng.random(P.shape)
        hit = U < P
        # keep strictly-upper entries only
        hit &= np.arange(r0, n)[None, :] > np.arange(r0, r1)[:, None]
        a, b = np.nonzero(hit)
        ii.append(a + r0)
        jj.append(b + r0)
    i = np.concatenate(ii) if ii else np.empty(0, np.int64)
    j = np.concatenate(jj) if jj else np.empty(0, np.int64)
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    A = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    A.sort_indices()
    return Graph(A)


def sample_grdpg(X, signature, seed=None):
    """Sample a GRDPG adjacency with ``A_ij ~ Bernoulli(X_i @ I_pq @ X_j)``."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if d != signature.d:
        raise ValueError(f"X has {d} columns but signature has d={signature.d}")
    XI = X * signature.diag
    rng = as_generator(seed)

    def prob_rows(r0, r1, c0):
        P = XI[r0:r1] @ X[c0:].T
        off = np.arange(c0, n)[None, :] != np.arange(r0, r1)[:, None]
        bad = off & ((P < 0) | (P > 1))
        if bad.any():
            a, b = np.argwhere(bad)[0]
            raise ValueError(
                f"inner product {P[a, b]!r} outside [0, 1] for pair ({r0 + a}, {c0 + b})"
            )
        return P

    return _sample_bernoulli_upper(n, prob_rows, rng)


def sample_dcsbm(model, n, seed=None):
    """Draw communities, weights and a graph from a DC-SBM.

    Returns a :class:`GrdpgSample` whose latent positions are
    ``sqrt(rho) * w_i * v[z_i]``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = as_generator(seed)
    K = model.K
    z = rng.choice(K, size=n, p=model.pi)
    w = np.empty(n)
    for k in range(K):
        members = np.flatnonzero(z == k)
        w[members] = model.weights[k].sample(rng, members.size)
    rhoB = model.rho * model.B

    def prob_rows(r0, r1, c0):
        return rhoB[z[r0:r1]][:, z[c0:]] * np.outer(w[r0:r1], w[c0:])

    graph = _sample_bernoulli_upper(n, prob_rows, rng)
    latent = model.latent
    xi = w[:, None] * latent.v[z]
    X = np.sqrt(model.rho) * xi
    # t_i = rho * w_i * sum_j w_j B[z_i, z_j]
    weight_sums = np.bincount(z, weights=w, minlength=K)
    t = model.rho * w * (model.B @ weight_sums)[z]
    return GrdpgSample(
        X=X, xi=xi, signature=latent.signature, t=t, graph=graph,
        rho=model.rho, z=z, w=w,
    )


def model_from_dict(cfg):
    """Build a :class:`DcsbmModel` from a parsed config mapping.

    Keys: ``B`` (matrix or preset name), ``pi``, ``rho``, ``weights`` (one
    ``{kind, params}`` mapping, or one per community) and ``regime``.
    """
    B = cfg["B"]
    if isinstance(B, str):
        try:
            B = B_PRESETS[B]
        except KeyError:
            raise ValueError(f"unknown B preset {B!r}; choose from {sorted(B_PRESETS)}")
    B = np.array(B, dtype=float)
    scale = float(cfg.get("B_scale", 1.0))
    K = B.shape[0]
    pi = cfg.get("pi", np.full(K, 1.0 / K))
    weights = cfg.get("weights", {"kind": "constant", "params": [1.0]})
    if isinstance(weights, dict):
        weights = [weights] * K
    weights = [WeightDist(h["kind"], tuple(h["params"])) for h in weights]
    return DcsbmModel(
        B=B * scale,
        pi=np.asarray(pi, dtype=float),
        weights=tuple(weights),
        rho=float(cfg.get("rho", 1.0)),
        regime=cfg.get("regime", "dense"),
    )
