"""Undirected weighted graphs and the matrices built from them.

Every downstream module indexes edges by their position in the canonical
(lexicographically sorted) edge list, so the edge index of an edge can be
recovered from the topology alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised when an edge list violates the graph invariants."""


@dataclass(frozen=True, eq=False)
class UGraph:
    """Undirected graph with strictly positive edge weights.

    Attributes:
        n: number of nodes.
        edges: (m, 2) int array of pairs ``(i, j)`` with ``i < j``, sorted
            lexicographically. Row ``a`` is edge index ``a``.
        weights: (m,) float array aligned with ``edges``.
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.n < 1:
            raise GraphError("graph needs at least one node")
        if len(edges) != len(weights):
            raise GraphError("weights and edges differ in length")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise GraphError("edges must satisfy i < j (no self loops)")
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphError("edge endpoint out of range")
            keys = edges[:, 0] * self.n + edges[:, 1]
            if np.any(np.diff(keys) <= 0):
                raise GraphError("edges must be sorted and unique")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise GraphError("edge weights must be finite and > 0")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_edges(cls, n, pairs, weights=None) -> "UGraph":
        """Build a graph from edges in any order and orientation.

        Pairs are reoriented to ``i < j`` and sorted; duplicates and self
        loops raise :class:`GraphError`.
        """
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if weights is None:
            weights = np.ones(len(pairs))
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(pairs):
            raise GraphError("weights and edges differ in length")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise GraphError("self loops are not allowed")
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        order = np.lexsort((hi, lo))
        canon = np.column_stack([lo[order], hi[order]])
        if len(canon) > 1 and np.any(np.all(canon[1:] == canon[:-1], axis=1)):
            raise GraphError("duplicate edges")
        return cls(int(n), canon, weights[order])

    @classmethod
    def from_matrix(cls, W, tol: float = 0.0) -> "UGraph":
        """Graph from the upper triangle of a symmetric matrix (entries > tol)."""
        W = sp.csr_matrix(W)
        upper = sp.triu(W, k=1).tocoo()
        keep = upper.data > tol
        return cls.from_edges(W.shape[0], np.column_stack([upper.row[keep], upper.col[keep]]),
                              upper.data[keep])

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def with_weights(self, weights) -> "UGraph":
        return UGraph(self.n, self.edges, weights)

    def binary(self) -> "UGraph":
        return UGraph(self.n, self.edges, np.ones(self.num_edges))

    def degrees(self) -> np.ndarray:
        """Binary (unweighted) node degrees."""
        return np.bincount(self.edges.ravel(), minlength=self.n)


def weighted_adjacency(g: UGraph) -> sp.csr_matrix:
    i, j = g.edges[:, 0], g.edges[:, 1]
    W = sp.coo_matrix((np.concatenate([g.weights, g.weights]),
                       (np.concatenate([i, j]), np.concatenate([j, i]))),
                      shape=(g.n, g.n))
    return W.tocsr()


def binary_adjacency(g: UGraph) -> sp.csr_matrix:
    A = weighted_adjacency(g)
    A.data[:] = 1.0
    return A


def laplacian(g: UGraph) -> sp.csr_matrix:
    """Combinatorial Laplacian ``D - W``."""
    W = weighted_adjacency(g)
    d = np.asarray(W.sum(axis=1)).ravel()
    return (sp.diags(d) - W).tocsr()


def sym_normalized_laplacian(A) -> sp.csr_matrix:
    """``I - D^{-1/2} A D^{-1/2}``; isolated nodes keep an identity row.

    Raises:
        ValueError: if ``A`` has negative entries.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    if A.nnz and A.data.min() < 0:
        raise ValueError("adjacency must be nonnegative")
    A = A - sp.diags(A.diagonal())
    A.eliminate_zeros()
    d = np.asarray(A.sum(axis=1)).ravel()
    inv = np.zeros_like(d)
    inv[d > 0] = 1.0 / np.sqrt(d[d > 0])
    Dm = sp.diags(inv)
    return (sp.identity(A.shape[0], format="csr") - Dm @ A @ Dm).tocsr()


def incidence(g: UGraph) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Directed and undirected incidence matrices, both ``n x m``.

    Edge ``a = (i, j)`` with ``i < j`` is oriented ``+1`` at ``i`` and ``-1``
    at ``j``.
    """
    m = g.num_edges
    cols = np.repeat(np.arange(m), 2)
    rows = g.edges.ravel()
    signs = np.tile([1.0, -1.0], m)
    B = sp.csr_matrix((signs, (rows, cols)), shape=(g.n, m))
    Bu = sp.csr_matrix((np.abs(signs), (rows, cols)), shape=(g.n, m))
    return B, Bu


@dataclass(frozen=True)
class EigenPair:
    values: np.ndarray
    vectors: np.ndarray


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m, dtype=np.float64)


def eigendecomposition(m, sym_tol: float = 1e-10) -> EigenPair:
    """Full symmetric eigendecomposition with eigenvalues ascending."""
    M = _dense(m)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, np.abs(M).max(initial=0.0))
    if np.abs(M - M.T).max(initial=0.0) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    values, vectors = np.linalg.eigh(M)
    return EigenPair(values, vectors)


class ConvergenceError(RuntimeError):
    pass


def lambda_max_estimate(m, tol: float = 1e-6, max_iter: int = 5000,
                        inflation: float = 1.01) -> float:
    """Power-iteration bound on the largest eigenvalue of a PSD matrix.

    The Rayleigh quotient is inflated by ``inflation`` so the returned value
    sits above the true maximum. Raises :class:`ConvergenceError` if the
    quotient has not settled to ``tol`` relative change after ``max_iter``
    steps; callers then fall back to :func:`eigendecomposition`.
    """
    M = sp.csr_matrix(m, dtype=np.float64)
    d = M.shape[0]
    x = np.random.Generator(np.random.PCG64(0x5EED)).random(d) + 0.5
    x /= np.linalg.norm(x)
    theta = 0.0
    for _ in range(max_iter):
        y = M @ x
        new = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(new - theta) <= tol * max(abs(new), 1e-300):
            return inflation * new
        theta = new
    raise ConvergenceError("power iteration did not converge")


def read_edgelist(path) -> UGraph:
    """Read the ``n m`` / ``i j w`` edge-list text format."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or len(lines[0]) != 2:
        raise GraphError("header must be 'n m'")
    n, m = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    if len(body) != m:
        raise GraphError(f"expected {m} edges, found {len(body)}")
    pairs, weights = [], []
    for row in body:
        if len(row) != 3:
            raise GraphError(f"malformed edge line: {' '.join(row)}")
        i, j = int(row[0]), int(row[1])
        if i >= j:
            raise GraphError(f"edge ({i}, {j}) must have i < j")
        pairs.append((i, j))
        weights.append(float(row[2]))
    return UGraph.from_edges(n, np.array(pairs, dtype=np.int64).reshape(-1, 2), weights)


def format_edgelist(g: UGraph) -> str:
    out = [f"{g.n} {g.num_edges}"]
    out += [f"{i} {j} {w!r}" for (i, j), w in zip(g.edges.tolist(), g.weights.tolist())]
    return "\n".join(out) + "\n"
