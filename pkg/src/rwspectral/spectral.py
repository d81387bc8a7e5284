"""Laplacian operators and a largest-magnitude symmetric eigensolver."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .graph import check_adjacency, check_connected

DEFAULT_TOL = 1e-10
DENSE_CUTOFF = 64
TIE_TOL = 1e-10
CLUSTER_TOL = 1e-8


class EigenConvergenceError(RuntimeError):
    """The iterative eigensolver did not reach the requested residual."""

    def __init__(self, message, residuals=None):
        self.residuals = residuals
        super().__init__(message)


class DegeneracyWarning(UserWarning):
    """The selected eigenpairs cut through a (near-)repeated eigenvalue."""


@dataclass(frozen=True)
class EigenPairs:
    """Eigenpairs sorted by decreasing ``|value|``.

    ``vectors`` has orthonormal columns (for random walk pairs it holds the
    orthonormal L_sym vectors; canonical vectors are in ``canonical``).
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    degenerate: bool = False
    canonical: np.ndarray | None = field(default=None, repr=False)

    @property
    def m(self):
        return self.values.size


def sym_laplacian(graph):
    """Sparse ``D^{-1/2} A D^{-1/2}``; requires every degree >= 1."""
    graph = check_adjacency(graph, require_no_isolated=True)
    s = 1.0 / np.sqrt(graph.degrees)
    D = sparse.diags(s)
    L = (D @ graph.adjacency @ D).tocsr()
    L.sort_indices()
    return L


def _apply_sign_convention(V):
    """Scale each column so its largest-|.| entry (lowest index) is positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _select_by_magnitude(vals, m):
    """Indices of the m largest |vals|; ties prefer the more positive value."""
    order = np.lexsort((-vals, -np.abs(vals)))
    return order[:m], order


def _dense_matrix(op):
    if sparse.issparse(op):
        return op.toarray()
    if isinstance(op, np.ndarray):
        return op
    n = op.shape[0]
    return op @ np.eye(n)


def _residuals(op, vals, vecs):
    return np.linalg.norm(op @ vecs - vecs * vals, axis=0)


def _dense_eigs(op):
    M = _dense_matrix(op)
    if not np.allclose(M, M.T, atol=1e-12, rtol=0):
        raise ValueError("operator is not symmetric")
    return np.linalg.eigh((M + M.T) / 2)


def _arpack(op, k, which, v0, tol, maxiter):
    n = op.shape[0]
    ncv = min(n, max(2 * k + 1, 20))
    try:
        return eigsh(op, k=k, which=which, v0=v0, tol=tol, ncv=ncv, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        raise EigenConvergenceError(
            f"ARPACK ({which}) failed to converge {k} eigenpairs in {maxiter} restarts",
            residuals=None if exc.eigenvectors is None else _residuals(
                op, exc.eigenvalues, exc.eigenvectors
            ),
        ) from exc


def top_eigenpairs_by_magnitude(op, m, tol=DEFAULT_TOL, seed=0, max_restarts=None):
    """The ``m`` eigenpairs of largest ``|lambda|`` of a symmetric operator.

    For ``n > 64`` both ends of the spectrum are computed with implicitly
    restarted Lanczos (ARPACK) and merged by magnitude; smaller problems use
    a dense eigendecomposition.

    Parameters
    ----------
    op : sparse matrix, ndarray or LinearOperator of shape (n, n)
    m : int
        Number of eigenpairs to return.
    tol : float
        Target residual ``||op u - lambda u||``.
    seed : int
        Seed for the Lanczos starting vector.
    max_restarts : int, optional
        Iteration budget per end of the spectrum; defaults to ``50 * m``
        (at least 100).

    Returns
    -------
    EigenPairs
    """
    n = op.shape[0]
    if op.shape != (n, n):
        raise ValueError(f"operator must be square, got {op.shape}")
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    # one extra pair lets us detect a magnitude tie at position m
    k = m + 1
    if n <= DENSE_CUTOFF or 2 * k >= n - 1:
        vals, vecs = _dense_eigs(op)
    else:
        if max_restarts is None:
            max_restarts = max(50 * m, 100)
        v0 = np.random.default_rng(seed).standard_normal(n)
        top_vals, top_vecs = _arpack(op, k, "LA", v0, tol, max_restarts)
        bot_vals, bot_vecs = _arpack(op, k, "SA", v0, tol, max_restarts)
        # ARPACK returns ascending order
        top_vals, top_vecs = top_vals[::-1], top_vecs[:, ::-1]
        vals, vecs, crossed = _merge_ends(top_vals, top_vecs, bot_vals, bot_vecs, k)
        if crossed:
            # Both ends reached the same eigenvalue cluster; the two Krylov
            # bases are not mutually orthogonal there.
            vals, vecs = _dense_eigs(op)
    sel, order = _select_by_magnitude(vals, m)
    degenerate = False
    if order.size > m:
        nxt = order[m]
        if abs(abs(vals[sel[-1]]) - abs(vals[nxt])) <= TIE_TOL:
            degenerate = True
            warnings.warn(
                f"eigenvalue magnitude tie at position {m}: "
                f"{vals[sel[-1]]!r} vs {vals[nxt]!r}; returning an arbitrary basis",
                DegeneracyWarning,
                stacklevel=2,
            )
    vals = vals[sel]
    vecs = _apply_sign_convention(np.ascontiguousarray(vecs[:, sel]))
    res = _residuals(op, vals, vecs)
    bound = max(tol, tol * np.max(np.abs(vals), initial=0.0)) * 1e3
    if np.any(res > bound):
        raise EigenConvergenceError(
            f"eigenpair residuals {res} exceed tolerance {bound:g}", residuals=res
        )
    return EigenPairs(values=vals, vectors=vecs, residuals=res, degenerate=degenerate)


def _merge_ends(top_vals, top_vecs, bot_vals, bot_vecs, k):
    """Two-pointer merge of descending (top) and ascending (bottom) spectra."""
    i = j = 0
    out_vals, out_vecs = [], []
    while len(out_vals) < k and (i < top_vals.size or j < bot_vals.size):
        take_top = j >= bot_vals.size or (
            i < top_vals.size and abs(top_vals[i]) >= abs(bot_vals[j])
        )
        if take_top:
            out_vals.append(top_vals[i])
            out_vecs.append(top_vecs[:, i])
            i += 1
        else:
            out_vals.append(bot_vals[j])
            out_vecs.append(bot_vecs[:, j])
            j += 1
    crossed = False
    if i and j:
        crossed = top_vals[i - 1] - bot_vals[j - 1] <= CLUSTER_TOL
    return np.array(out_vals), np.column_stack(out_vecs), crossed


def rw_eigenpairs(graph, m, tol=DEFAULT_TOL, seed=0):
    """Top-``m`` magnitude eigenpairs of the random walk Laplacian ``D^{-1} A``.

    Eigenvalues are those of ``L_sym``; ``canonical`` holds the canonical
    eigenvectors ``D^{-1/2} u`` where ``u`` are orthonormal ``L_sym``
    eigenvectors. The trivial pair (1, constant) is set exactly.
    """
    graph = check_adjacency(graph, require_no_isolated=True)
    check_connected(graph)
    L = sym_laplacian(graph)
    pairs = top_eigenpairs_by_magnitude(L, m, tol=tol, seed=seed)
    vals, vecs = pairs.values.copy(), pairs.vectors.copy()
    sqrt_d = np.sqrt(graph.degrees)
    if abs(vals[0] - 1.0) > 1e3 * tol:
        raise EigenConvergenceError(f"leading eigenvalue {vals[0]!r} is not 1")
    vals[0] = 1.0
    vecs[:, 0] = sqrt_d / np.sqrt(graph.degrees.sum())
    canonical = vecs / sqrt_d[:, None]
    res = _residuals(L, vals, vecs)
    return EigenPairs(
        values=vals,
        vectors=vecs,
        residuals=res,
        degenerate=pairs.degenerate,
        canonical=canonical,
    )

