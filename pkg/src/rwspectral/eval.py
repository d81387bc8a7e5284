"""Classification error, Monte-Carlo experiments and empirical CLT checks."""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment
from scipy.sparse.csgraph import connected_components as csgraph_components

from .graph import connected_components
from .io import config_hash
from .model import (
    B_PRESETS,
    DcsbmModel,
    WeightDist,
    degree_corrected_positions,
    replicate_seed,
    sample_dcsbm,
)
from .pipeline import CLUSTERING_PIPELINES, METHOD_PIPELINES, Pipeline, embed_points, run_pipeline
from .spectral import rw_eigenpairs
from .theory import (
    align,
    clt_cov_dcsbm,
    dcsbm_moments,
    ellipse_level_set,
    hyperplane_frame,
    oracle_alignment,
)

BRUTE_FORCE_MAX_K = 8
LCC_FRACTION = 0.95
MAX_RESAMPLES = 100


def _confusion(zhat, z, K):
    zhat = np.asarray(zhat, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    if zhat.shape != z.shape or zhat.ndim != 1:
        raise ValueError("label vectors must be 1-d and of equal length")
    if K is None:
        K = int(max(zhat.max(initial=0), z.max(initial=0))) + 1
    for name, lab in (("zhat", zhat), ("z", z)):
        if lab.size and (lab.min() < 0 or lab.max() >= K):
            raise ValueError(f"{name} has labels outside 0..{K - 1}")
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (zhat, z), 1)
    return C


def classification_error(zhat, z, K=None, method="auto"):
    """Fraction misclassified under the best relabelling of ``zhat``.

    Labels are integers in ``0..K-1``. ``method`` is ``"brute"`` (all K!
    permutations), ``"assignment"`` (Hungarian algorithm on the confusion
    matrix) or ``"auto"`` (brute force up to K = 8).
    """
    C = _confusion(zhat, z, K)
    K = C.shape[0]
    n = int(C.sum())
    if n == 0:
        raise ValueError("empty label vectors")
    if method == "auto":
        method = "brute" if K <= BRUTE_FORCE_MAX_K else "assignment"
    if method == "brute":
        perms = np.array(list(itertools.permutations(range(K))))
        best = C[np.arange(K), perms].sum(axis=1).max()
    elif method == "assignment":
        rows, cols = linear_sum_assignment(C, maximize=True)
        best = C[rows, cols].sum()
    else:
        raise ValueError(f"unknown method {method!r}")
    return 1.0 - best / n


def component_policy(graph, fraction=LCC_FRACTION):
    """Node subset to analyse, or ``None`` when the graph must be resampled.

    Connected graphs are used whole; otherwise the largest component is
    kept if it holds at least ``fraction`` of the nodes.
    """
    comps = connected_components(graph)
    if len(comps) == 1:
        return comps[0]
    if comps[0].size >= fraction * graph.n:
        return comps[0]
    return None


def sample_connected(model, n, seed, *key):
    """Sample until the component policy accepts; returns (sample, resamples)."""
    for attempt in range(MAX_RESAMPLES):
        sample = sample_dcsbm(model, n, replicate_seed(seed, *key, attempt))
        nodes = component_policy(sample.graph)
        if nodes is not None:
            if nodes.size < n:
                sample = sample.restrict(nodes)
            return sample, attempt
    raise RuntimeError(f"no acceptable graph after {MAX_RESAMPLES} draws (n={n})")


# Experiments


@dataclass(frozen=True)
class ExperimentConfig:
    """One panel of the simulation study.

    ``b_source`` picks the block matrix (``eq10``, ``eqB2``, ``eqB3`` or
    ``custom`` with ``B``). ``eq10`` is the sparse condition and is scaled
    by 5 when dense; ``eqB2``/``eqB3`` are the dense condition and are
    divided by 4 when sparse.
    """

    b_source: str = "eq10"
    regime: str = "sparse"
    balance: str = "balanced"
    n_grid: tuple = (500, 1000, 2000)
    reps: int = 20
    pipelines: tuple = CLUSTERING_PIPELINES
    seed: int = 0
    B: tuple | None = None
    weight_range: tuple = (0.1, 1.0)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be non-empty and strictly ascending")
        if self.regime not in ("sparse", "dense"):
            raise ValueError(f"regime must be sparse or dense, got {self.regime!r}")
        if self.balance not in ("balanced", "imbalanced"):
            raise ValueError(f"balance must be balanced or imbalanced, got {self.balance!r}")
        if self.b_source not in (*B_PRESETS, "custom"):
            raise ValueError(f"unknown b_source {self.b_source!r}")
        if self.b_source == "custom" and self.B is None:
            raise ValueError("custom b_source needs B")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(
            self, "pipelines", tuple(Pipeline.parse(p) for p in self.pipelines)
        )
        if self.B is not None:
            object.__setattr__(self, "B", tuple(tuple(map(float, r)) for r in self.B))

    def model(self):
        if self.b_source == "custom":
            B = np.array(self.B)
        else:
            B = B_PRESETS[self.b_source].copy()
            if self.b_source == "eq10" and self.regime == "dense":
                B = B * 5
            elif self.b_source != "eq10" and self.regime == "sparse":
                B = B / 4
        K = B.shape[0]
        if self.balance == "balanced":
            pi = np.full(K, 1.0 / K)
        else:
            if K != 3:
                raise ValueError("imbalanced preset is defined for K = 3")
            pi = np.array([0.6, 0.2, 0.2])
        return DcsbmModel(B, pi, WeightDist.uniform(*self.weight_range), 1.0, self.regime)

    def to_dict(self):
        out = asdict(self)
        out["pipelines"] = [p.name for p in self.pipelines]
        out["n_grid"] = list(self.n_grid)
        return out

    @classmethod
    def from_dict(cls, cfg):
        cfg = dict(cfg)
        if "b_source" not in cfg and "b-source" in cfg:
            cfg["b_source"] = cfg.pop("b-source")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**cfg)


def preset_experiment(name, **overrides):
    """Built-in panels named ``[eqB2_|eqB3_]fig{3,4}_{sparse,dense}_{balanced,imbalanced}``.

    Desk-scale grids: sparse ``(500, 1000, 2000, 4000)``, dense halves it.
    """
    parts = name.split("_")
    b_source = "eq10"
    if parts[0] in ("eqB2", "eqB3"):
        b_source = parts.pop(0)
    if len(parts) != 3 or parts[0] not in ("fig3", "fig4"):
        raise ValueError(f"unknown experiment preset {name!r}")
    fig, regime, balance = parts
    grid = (500, 1000, 2000, 4000) if regime == "sparse" else (250, 500, 1000, 2000)
    cfg = dict(
        b_source=b_source, regime=regime, balance=balance, n_grid=grid, reps=20,
        pipelines=CLUSTERING_PIPELINES if fig == "fig3" else METHOD_PIPELINES,
    )
    cfg.update(overrides)
    return ExperimentConfig(**cfg)


@dataclass
class ResultTable:
    rows: list
    errors: dict
    config_hash: str
    seed: int
    resamples: dict = field(default_factory=dict)

    header = ("n", "pipeline", "mean_error", "stderr", "reps")

    def as_rows(self):
        return [tuple(r[h] for h in self.header) for r in self.rows]

    def lookup(self, n, pipeline):
        name = Pipeline.parse(pipeline).name
        for r in self.rows:
            if r["n"] == n and r["pipeline"] == name:
                return r
        raise KeyError((n, name))


def population_blocks(B):
    """Communities grouped by connectivity of the block graph ``B > 0``."""
    n_blocks, lab = csgraph_components(np.asarray(B) > 0, directed=False)
    return [np.flatnonzero(lab == b) for b in range(n_blocks)]


def _replicate_reducible(model, n, n_idx, rep, seed, pipelines, K):
    # Disconnected by design: each graph component is its own cluster.
    sample = sample_dcsbm(model, n, replicate_seed(seed, n_idx, rep, 0))
    comps = connected_components(sample.graph)
    labels = np.empty(sample.n, dtype=np.int64)
    for c, nodes in enumerate(comps):
        labels[nodes] = c
    err = classification_error(labels, sample.z, max(K, len(comps)))
    return [err] * len(pipelines), 0


def _replicate(model, n, n_idx, rep, seed, pipelines, d, K):
    if len(population_blocks(model.B)) > 1:
        return _replicate_reducible(model, n, n_idx, rep, seed, pipelines, K)
    sample, resamples = sample_connected(model, n, seed, n_idx, rep)
    cluster_seed = int(replicate_seed(seed, n_idx, rep, MAX_RESAMPLES).generate_state(1)[0])
    cache = {}
    errors = []
    for p in pipelines:
        key = (p.embedding, p.correction)
        if key not in cache:
            cache[key] = embed_points(sample.graph, d, p, seed=0)
        labels = run_pipeline(sample.graph, d, K, p, seed=cluster_seed, points=cache[key])
        errors.append(classification_error(labels, sample.z, K))
    return errors, resamples


def run_experiment(config, n_jobs=1):
    """Mean classification error per (n, pipeline) over independent replicates.

    Each replicate draws its own graph from an RNG stream keyed by
    (seed, n index, replicate, attempt); all pipelines are scored on that
    same graph. Results do not depend on ``n_jobs``.
    """
    model = config.model()
    K = model.K
    blocks = population_blocks(model.B)
    if len(blocks) > 1 and any(b.size > 1 for b in blocks):
        raise ValueError("disconnected block graphs are supported only with one community per block")
    d = K
    tasks = [(i, n, r) for i, n in enumerate(config.n_grid) for r in range(config.reps)]
    out = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(model, n, i, r, config.seed, config.pipelines, d, K)
        for i, n, r in tasks
    )
    errors, resamples, rows = {}, {}, []
    for i, n in enumerate(config.n_grid):
        block = [out[j] for j, t in enumerate(tasks) if t[0] == i]
        resamples[n] = int(sum(b[1] for b in block))
        for p_idx, p in enumerate(config.pipelines):
            e = np.array([b[0][p_idx] for b in block])
            errors[(n, p.name)] = e
            se = float(e.std(ddof=1) / np.sqrt(e.size)) if e.size > 1 else 0.0
            rows.append({"n": n, "pipeline": p.name, "mean_error": float(np.mean(e)),
                         "stderr": se, "reps": int(e.size)})
    return ResultTable(rows, errors, config_hash(config.to_dict()), config.seed, resamples)


# Empirical theory checks


def aligned_errors(sample, d, method="procrustes", seed=0):
    """Embed with RWSE+, align to the degree-corrected positions, return residuals.

    ``method="procrustes"`` uses :func:`oracle_alignment` (needs the true
    positions, as in simulation); ``"lstsq"`` fits the map by least squares.
    Returns ``(residuals, alignment)`` with residual rows
    ``M @ Xplus_i - Xtilde_i`` in latent coordinates.
    """
    pairs = rw_eigenpairs(sample.graph, d, seed=seed)
    points = pairs.canonical * np.sqrt(np.abs(pairs.values))
    targets = degree_corrected_positions(sample.X, sample.t)
    if method == "procrustes":
        amap = oracle_alignment(
            pairs.vectors, pairs.values, sample.graph.degrees,
            sample.X, sample.t, sample.signature,
        )
    elif method == "lstsq":
        amap = align(points, targets, sample.signature)
    else:
        raise ValueError(f"unknown alignment method {method!r}")
    return amap.apply(points) - targets, amap


@dataclass
class CovarianceReport:
    """Empirical versus theoretical error covariance for one weight bucket.

    Covariances are of ``n^{3/2} rho`` times the aligned errors, expressed in
    coordinates 2..d of the frame whose first axis is the hyperplane normal.
    """

    community: int
    w_interval: tuple
    w_mid: float
    n: int
    reps: int
    regime: str
    count: int
    errors: np.ndarray
    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray
    discrepancy: float
    mean_bound: float
    full_discrepancy: float
    ellipses: dict

    @property
    def mean_ok(self):
        return bool(np.linalg.norm(self.empirical_mean) <= self.mean_bound)

    def summary(self):
        return {
            "community": self.community, "w_interval": list(self.w_interval),
            "w_mid": self.w_mid, "n": self.n, "reps": self.reps, "regime": self.regime,
            "count": self.count, "empirical_mean": self.empirical_mean.tolist(),
            "mean_bound": self.mean_bound, "empirical_cov": self.empirical_cov.tolist(),
            "theoretical_cov": self.theoretical_cov.tolist(),
            "relative_frobenius": self.discrepancy,
            "relative_frobenius_full": self.full_discrepancy,
        }


def clt_empirical_check(model, n, reps, community, w_interval, seed=0, regime=None,
                        level=0.95, n_points=100, min_count=200, method="procrustes"):
    """Pool scaled aligned errors of bucket nodes and compare with theory."""
    regime = model.regime if regime is None else regime
    wmin, wmax = w_interval
    d = model.latent.signature.d
    full = []
    for rep in range(reps):
        sample, _ = sample_connected(model, n, seed, rep)
        resid, _ = aligned_errors(sample, d, method=method)
        mask = (sample.z == community) & (sample.w >= wmin) & (sample.w <= wmax)
        full.append(resid[mask] * n**1.5 * model.rho)
    full = np.vstack(full) if full else np.empty((0, d))
    count = full.shape[0]
    if count == 0:
        raise ValueError("weight bucket is empty")
    if count < min_count:
        raise ValueError(f"bucket pools only {count} nodes; need at least {min_count}")
    moments = dcsbm_moments(model)
    R = hyperplane_frame(moments)
    w_mid = (wmin + wmax) / 2
    Sigma = clt_cov_dcsbm(model, community, w_mid, regime=regime, moments=moments).Sigma
    scaled = (full @ R)[:, 1:]
    theory = (R.T @ Sigma @ R)[1:, 1:]
    emp_mean = scaled.mean(axis=0)
    emp_cov = np.cov(scaled, rowvar=False).reshape(d - 1, d - 1)
    disc = float(np.linalg.norm(emp_cov - theory) / np.linalg.norm(theory))
    full_cov = np.cov(full, rowvar=False)
    full_disc = float(np.linalg.norm(full_cov - Sigma) / np.linalg.norm(Sigma))
    bound = 4 * np.sqrt(np.linalg.eigvalsh(theory)[-1] / count)
    ellipses = {}
    if d - 1 == 2:
        ellipses = {
            "theory": ellipse_level_set(theory, np.zeros(2), level, n_points),
            "empirical": ellipse_level_set(emp_cov, emp_mean, level, n_points),
        }
    return CovarianceReport(
        community=community, w_interval=(wmin, wmax), w_mid=w_mid, n=n, reps=reps,
        regime=regime, count=count, errors=scaled, empirical_mean=emp_mean,
        empirical_cov=emp_cov, theoretical_cov=theory, discrepancy=disc,
        mean_bound=float(bound), full_discrepancy=full_disc, ellipses=ellipses,
    )


@dataclass
class ConsistencyCurve:
    rows: list
    slope: float
    errors: dict


def consistency_curve(model, n_grid, reps, seed=0, n_jobs=1, method="procrustes"):
    """Median over replicates of ``max_i ||M Xplus_i - Xtilde_i||`` per n,
    with the least-squares slope of log(median) on log(n)."""
    n_grid = tuple(int(n) for n in n_grid)
    if len(n_grid) < 3:
        raise ValueError("need at least three graph sizes")
    d = model.latent.signature.d

    def one(i, n, r):
        sample, _ = sample_connected(model, n, seed, i, r)
        resid, _ = aligned_errors(sample, d, method=method)
        return float(np.max(np.linalg.norm(resid, axis=1)))

    tasks = [(i, n, r) for i, n in enumerate(n_grid) for r in range(reps)]
    out = Parallel(n_jobs=n_jobs)(delayed(one)(*t) for t in tasks)
    rows, errors = [], {}
    for i, n in enumerate(n_grid):
        e = np.array([out[j] for j, t in enumerate(tasks) if t[0] == i])
        errors[n] = e
        q25, med, q75 = np.percentile(e, [25, 50, 75])
        rows.append({"n": n, "median": float(med), "q25": float(q25), "q75": float(q75)})
    med = np.array([r["median"] for r in rows])
    slope = float(np.polyfit(np.log(n_grid), np.log(med), 1)[0])
    return ConsistencyCurve(rows, slope, errors)
