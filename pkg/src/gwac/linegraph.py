"""Line graphs and edge-domain operators.

The weight vector of a graph is treated as a signal whose nodes are the
graph's edges. Two operators on that domain are supported: the normalized
Laplacian of the line graph (``"line"``) and the rescaled edge Laplacian
``B^T B`` (``"edge"``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import (ConvergenceError, UGraph, eigendecomposition, incidence,
                    lambda_max_estimate, sym_normalized_laplacian)

MODES = ("line", "edge")


@dataclass(frozen=True, eq=False)
class LineGraph:
    node_count: int
    adjacency: sp.csr_matrix
    edge_map: np.ndarray


@dataclass(frozen=True, eq=False)
class EdgeOperator:
    mode: str
    matrix: sp.csr_matrix
    spectral_bound: float


def _require_edges(g: UGraph):
    if g.num_edges == 0:
        raise ValueError("graph has no edges")


def line_graph(g: UGraph) -> LineGraph:
    """Line graph adjacency ``Bu^T Bu - 2I`` (depends only on the topology)."""
    _require_edges(g)
    _, Bu = incidence(g)
    AL = (Bu.T @ Bu).tocsr()
    AL.setdiag(0)
    AL.eliminate_zeros()
    # two distinct simple edges share at most one endpoint, so entries are 0/1
    AL.sort_indices()
    return LineGraph(g.num_edges, AL, g.edges.copy())


def edge_laplacian(g: UGraph) -> sp.csr_matrix:
    """``B^T B`` of the binary topology; diagonal is 2 everywhere."""
    _require_edges(g)
    B, _ = incidence(g)
    Le = (B.T @ B).tocsr()
    Le.eliminate_zeros()
    Le.sort_indices()
    return Le


def weight_signal(g: UGraph) -> np.ndarray:
    return np.array(g.weights, dtype=np.float64)


def build_operator(lg: LineGraph, g: UGraph, mode: str = "line") -> EdgeOperator:
    """Edge-domain operator with spectrum inside ``[0, 2]``.

    ``line`` uses the normalized Laplacian of the line graph. ``edge``
    rescales the edge Laplacian by ``2 / lambda_hat`` where ``lambda_hat``
    is an inflated power-iteration bound on its largest eigenvalue.
    """
    if lg.node_count != g.num_edges or not np.array_equal(lg.edge_map, g.edges):
        raise ValueError("line graph does not belong to this graph")
    if mode == "line":
        return EdgeOperator("line", sym_normalized_laplacian(lg.adjacency), 2.0)
    if mode == "edge":
        Le = edge_laplacian(g)
        try:
            lam = lambda_max_estimate(Le)
        except ConvergenceError:
            lam = 1.01 * float(eigendecomposition(Le).values[-1])
        return EdgeOperator("edge", (Le * (2.0 / lam)).tocsr(), lam)
    raise ValueError(f"unknown operator mode {mode!r}")
