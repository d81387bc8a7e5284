"""Simple undirected graphs backed by a CSR adjacency matrix."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


class DisconnectedGraphError(ValueError):
    """Raised when an operation needs a connected graph."""

    def __init__(self, n_components, sizes):
        self.n_components = n_components
        self.sizes = list(sizes)
        super().__init__(
            f"graph has {n_components} connected components (sizes {self.sizes[:10]}"
            f"{'...' if len(self.sizes) > 10 else ''}); embed each component "
            "separately or restrict to the largest one"
        )


class IsolatedNodeError(ValueError):
    """Raised when a node of degree zero is present."""

    def __init__(self, nodes):
        self.nodes = np.asarray(nodes)
        head = ", ".join(str(i) for i in self.nodes[:10])
        super().__init__(f"{len(self.nodes)} isolated node(s) (degree 0): {head}")


@dataclass(frozen=True)
class Graph:
    """A simple undirected graph.

    Parameters
    ----------
    adjacency : scipy.sparse.csr_matrix of shape (n, n)
        Symmetric, hollow 0/1 adjacency matrix (float64 entries).
    """

    adjacency: sparse.csr_matrix
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        A = self.adjacency
        object.__setattr__(
            self, "degrees", np.asarray(A.sum(axis=1)).ravel().astype(np.float64)
        )

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        return int(self.adjacency.nnz // 2)

    def edges(self):
        """Return the edge list as an (n_edges, 2) int array with i < j."""
        upper = sparse.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)

    def subgraph(self, nodes):
        """Induced subgraph on ``nodes`` (kept in the given order)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        return Graph(self.adjacency[nodes][:, nodes].tocsr())

    @classmethod
    def from_edges(cls, n, edges):
        """Build a graph from an (m, 2) array of node index pairs.

        Self-loops are dropped and duplicate edges collapsed.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        keep = edges[:, 0] != edges[:, 1]
        i, j = edges[keep, 0], edges[keep, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        A = sparse.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(n, n), dtype=np.float64
        )
        A.sum_duplicates()
        A.data[:] = 1.0
        A.sort_indices()
        return cls(A)


def check_adjacency(A, *, require_no_isolated=False):
    """Validate an adjacency-like input and return a :class:`Graph`.

    Accepts a :class:`Graph`, a scipy sparse matrix or a dense array. The
    matrix must be square, symmetric, hollow and 0/1 valued.
    """
    if isinstance(A, Graph):
        graph = A
    else:
        if sparse.issparse(A):
            M = sparse.csr_matrix(A, dtype=np.float64)
        else:
            arr = np.asarray(A, dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"adjacency must be 2-d, got shape {arr.shape}")
            M = sparse.csr_matrix(arr)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {M.shape}")
        M.eliminate_zeros()
        if M.nnz and not np.all(M.data == 1.0):
            raise ValueError("adjacency entries must be 0 or 1")
        if M.diagonal().any():
            raise ValueError("adjacency must be hollow (no self-loops)")
        if (M != M.T).nnz:
            raise ValueError("adjacency must be symmetric")
        M.sort_indices()
        graph = Graph(M)
    if require_no_isolated:
        isolated = np.flatnonzero(graph.degrees == 0)
        if isolated.size:
            raise IsolatedNodeError(isolated)
    return graph


def connected_components(graph):
    """Partition nodes into connected components.

    Returns
    -------
    list of ndarray
        Node index arrays, sorted by size descending (ties by smallest node
        index). Indices inside each component are ascending.
    """
    graph = check_adjacency(graph)
    n_comp, labels = csgraph.connected_components(graph.adjacency, directed=False)
    comps = [np.flatnonzero(labels == c) for c in range(n_comp)]
    comps.sort(key=lambda c: (-c.size, c[0]))
    return comps


def check_connected(graph):
    comps = connected_components(graph)
    if len(comps) > 1:
        raise DisconnectedGraphError(len(comps), [c.size for c in comps])
    return graph


def largest_component(graph):
    """Return (subgraph, node indices) of the largest connected component."""
    nodes = connected_components(graph)[0]
    return graph.subgraph(nodes), nodes
