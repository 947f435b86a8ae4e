"""Two-channel biorthogonal graph filter banks with Harary bipartition.

Kernels are exact polynomials in the spectral variable on ``[0, 2]``. A
non-bipartite graph is covered by bipartite subgraphs read off the bits of
a greedy proper coloring; each subgraph defines one level of a separable,
critically sampled cascade.

Coefficient vectors are stored in ascending powers (``c[0] + c[1] x + ...``).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, sqrt

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import polynomial as P

from .linegraph import EdgeOperator, LineGraph

_GRID = np.linspace(0.0, 2.0, 1001)
_REFLECT = np.array([2.0, -1.0])  # x -> 2 - x


@dataclass(frozen=True, eq=False)
class BiorFilterBank:
    h0: np.ndarray
    h1: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    halfband: np.ndarray
    design_orders: tuple[int, int]
    pr_residual: float


def reflect(c) -> np.ndarray:
    """Coefficients of ``x -> c(2 - x)``."""
    out = np.zeros(1)
    power = np.ones(1)
    for ck in np.asarray(c, dtype=np.float64):
        out = P.polyadd(out, ck * power)
        power = P.polymul(power, _REFLECT)
    return P.polytrim(out, 0.0) if np.any(out) else np.zeros(1)


def halfband_polynomial(K: int) -> np.ndarray:
    """Maximally flat half-band ``p`` with ``K`` zeros at 2 and ``p + p(2-x) = 2``."""
    # substitution x = 2 y maps the problem to the Daubechies form on [0, 1]
    q = np.array([comb(K - 1 + j, j) / 2.0 ** j for j in range(K)], dtype=np.float64)
    tail = P.polypow(np.array([1.0, -0.5]), K)
    return 2.0 * P.polymul(tail, q)


def pr_residual(h0, g0) -> float:
    # factors are evaluated separately; the expanded product loses digits for K >= 8
    def prod(x):
        return P.polyval(x, h0) * P.polyval(x, g0)
    return float(np.abs(prod(_GRID) + prod(2.0 - _GRID) - 2.0).max())


def _root_units(q) -> list[np.ndarray]:
    """Roots of ``q`` grouped as real singletons and conjugate pairs."""
    roots = np.roots(np.asarray(q)[::-1])
    units, used = [], np.zeros(len(roots), bool)
    for idx in np.argsort(roots.real, kind="stable"):
        if used[idx]:
            continue
        r = roots[idx]
        used[idx] = True
        if abs(r.imag) <= 1e-9 * max(1.0, abs(r)):
            units.append(np.array([r.real]))
            continue
        rest = np.flatnonzero(~used)
        mate = rest[np.argmin(np.abs(roots[rest] - np.conj(r)))]
        used[mate] = True
        units.append(np.array([r, np.conj(r)]))
    units.sort(key=lambda u: (u[0].real, abs(u[0].imag)))
    return units


def _from_roots(roots) -> np.ndarray:
    c = np.ones(1, dtype=complex)
    for r in roots:
        c = P.polymul(c, np.array([-r, 1.0]))
    if np.abs(c.imag).max() > 1e-9 * max(1.0, np.abs(c.real).max()):
        raise ValueError("factor has complex coefficients")
    return c.real


def design_biorthogonal(K: int = 8) -> BiorFilterBank:
    """Spectral factorization of the maximally flat half-band polynomial.

    The ``K`` zeros at 2 are split evenly between ``h0`` and ``g0``. The
    remaining roots, taken as real singletons or intact conjugate pairs in
    ascending order of real part, alternate between ``g0`` and ``h0``
    starting with ``g0``. Scaling gives ``h0(0) = sqrt(2)`` and
    ``h0(0) g0(0) = p(0)``.
    """
    if K < 2 or K % 2:
        raise ValueError("K must be an even integer >= 2")
    p = halfband_polynomial(K)
    q = np.array([comb(K - 1 + j, j) / 2.0 ** j for j in range(K)])
    h_roots = [2.0] * (K // 2)
    g_roots = [2.0] * (K // 2)
    for n, unit in enumerate(_root_units(q)):
        (g_roots if n % 2 == 0 else h_roots).extend(unit)
    h0 = _from_roots(h_roots)
    g0 = _from_roots(g_roots)
    h0 *= sqrt(2.0) / h0[0]
    g0 *= (sqrt(2.0) / (p[0] / 2.0)) / g0[0]
    return BiorFilterBank(h0=h0, h1=reflect(g0), g0=g0, g1=reflect(h0), halfband=p,
                          design_orders=(K // 2, K // 2), pr_residual=pr_residual(h0, g0))


def apply_polynomial(coef, op, x) -> np.ndarray:
    """``c(op) @ x`` by Horner's rule; ``x`` may hold signals in columns."""
    x = np.asarray(x, dtype=np.float64)
    y = coef[-1] * x
    for c in coef[-2::-1]:
        y = op @ y + c * x
    return y


@dataclass(frozen=True, eq=False)
class BipartiteDecomposition:
    """Harary cover of a graph by ``levels`` bipartite subgraphs.

    ``color_bits[:, t]`` is the side (0 = lowpass set) of each node at level
    ``t``; level 0 holds the most significant color bit. ``level_edges[t]``
    lists the edges whose endpoint colors first differ at bit ``t``. Only the
    first ``m_used`` levels drive the transform; edges of the remaining
    levels are the discarded set.
    """

    levels: int
    m_used: int
    colors: np.ndarray
    color_bits: np.ndarray
    level_edges: list

    @property
    def n_nodes(self) -> int:
        return len(self.colors)

    @property
    def num_colors(self) -> int:
        return int(self.colors.max()) + 1 if len(self.colors) else 0

    @property
    def discarded_edges(self) -> np.ndarray:
        rest = self.level_edges[self.m_used:]
        return np.concatenate(rest) if rest else np.zeros((0, 2), np.int64)

    def side_sets(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        bits = self.color_bits[:, t]
        return np.flatnonzero(bits == 0), np.flatnonzero(bits == 1)

    def channel_code(self) -> np.ndarray:
        code = np.zeros(self.n_nodes, dtype=np.int64)
        for t in range(self.m_used):
            code = (code << 1) | self.color_bits[:, t]
        return code

    def channel_nodes(self) -> list[np.ndarray]:
        code = self.channel_code()
        return [np.flatnonzero(code == k) for k in range(2 ** self.m_used)]


def greedy_coloring(A) -> np.ndarray:
    """Proper coloring visiting nodes by descending degree, ties by index."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    deg = np.diff(A.indptr)
    order = np.lexsort((np.arange(n), -deg))
    colors = np.full(n, -1, dtype=np.int64)
    taken = np.zeros(int(deg.max(initial=0)) + 2, dtype=bool)
    indptr, indices = A.indptr, A.indices
    for v in order:
        nb = colors[indices[indptr[v]:indptr[v + 1]]]
        nb = nb[nb >= 0]
        taken[nb] = True
        c = int(np.argmin(taken))
        taken[nb] = False
        colors[v] = c
    return colors


def harary_decompose(graph, m_max: int = 2) -> BipartiteDecomposition:
    """Bipartite cover of ``graph`` (a LineGraph or adjacency matrix)."""
    A = graph.adjacency if isinstance(graph, LineGraph) else sp.csr_matrix(graph)
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    colors = greedy_coloring(A)
    F = int(colors.max()) + 1 if len(colors) else 1
    m = max(1, int(np.ceil(np.log2(F))) if F > 1 else 1)
    bits = np.stack([(colors >> (m - 1 - t)) & 1 for t in range(m)], axis=1)
    upper = sp.triu(A, k=1).tocoo()
    u, v = upper.row.astype(np.int64), upper.col.astype(np.int64)
    order = np.lexsort((v, u))
    u, v = u[order], v[order]
    diff = colors[u] ^ colors[v]
    # diff > 0 for a proper coloring; level = position of the leading 1 bit
    level = m - np.frexp(np.maximum(diff, 1).astype(np.float64))[1].astype(np.int64)
    level_edges = [np.column_stack([u[level == t], v[level == t]]) for t in range(m)]
    return BipartiteDecomposition(levels=m, m_used=min(m, m_max), colors=colors,
                                  color_bits=bits.astype(np.int64), level_edges=level_edges)


def level_operators(op, dec: BipartiteDecomposition) -> list[sp.csr_matrix]:
    """Normalized operator of each used level's bipartite subgraph.

    Off-diagonal signs follow ``op`` (all ``+1`` adjacencies for the line
    Laplacian, signed for the edge Laplacian); magnitudes are renormalized
    by level degree so that ``J T J = 2I - T`` holds for the level's side
    indicator ``J``. Nodes without level edges keep an identity row.
    """
    M = sp.csr_matrix(op.matrix if isinstance(op, EdgeOperator) else op)
    n = dec.n_nodes
    if M.shape != (n, n):
        raise ValueError("operator and decomposition sizes differ")
    ops = []
    for t in range(dec.m_used):
        e = dec.level_edges[t]
        if len(e) == 0:
            ops.append(sp.identity(n, format="csr"))
            continue
        vals = np.asarray(M[e[:, 0], e[:, 1]]).ravel()
        s = -np.sign(vals)
        if np.any(s == 0):
            raise ValueError("operator has no entry on a decomposition edge")
        S = sp.coo_matrix((np.concatenate([s, s]),
                           (np.concatenate([e[:, 0], e[:, 1]]),
                            np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)).tocsr()
        d = np.bincount(e.ravel(), minlength=n).astype(np.float64)
        inv = np.zeros(n)
        inv[d > 0] = 1.0 / np.sqrt(d[d > 0])
        Dm = sp.diags(inv)
        ops.append((sp.identity(n, format="csr") - Dm @ S @ Dm).tocsr())
    return ops


@dataclass(frozen=True, eq=False)
class SubbandCoefficients:
    """Critically sampled subbands; ``channels[k]`` lives on ``channel_nodes[k]``."""

    channels: list
    channel_nodes: list

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.channels, axis=0)

    def with_flat(self, values) -> "SubbandCoefficients":
        values = np.asarray(values, dtype=np.float64)
        cuts = np.cumsum([len(c) for c in self.channel_nodes])[:-1]
        return SubbandCoefficients(list(np.split(values, cuts, axis=0)), self.channel_nodes)

    def channel_index_map(self) -> np.ndarray:
        """``(n, 2)`` array of (channel, position) per node."""
        n = sum(len(c) for c in self.channel_nodes)
        out = np.empty((n, 2), dtype=np.int64)
        for k, nodes in enumerate(self.channel_nodes):
            out[nodes, 0] = k
            out[nodes, 1] = np.arange(len(nodes))
        return out


def analyze(op, dec: BipartiteDecomposition, fb: BiorFilterBank, f,
            level_ops=None) -> SubbandCoefficients:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != dec.n_nodes:
        raise ValueError(f"signal length {f.shape[0]} != {dec.n_nodes} nodes")
    ops = level_ops if level_ops is not None else level_operators(op, dec)
    signals = [f]
    for T in ops:
        signals = [y for x in signals
                   for y in (apply_polynomial(fb.h0, T, x), apply_polynomial(fb.h1, T, x))]
    nodes = dec.channel_nodes()
    return SubbandCoefficients([s[idx] for s, idx in zip(signals, nodes)], nodes)


def synthesize(op, dec: BipartiteDecomposition, fb: BiorFilterBank,
               c: SubbandCoefficients, level_ops=None) -> np.ndarray:
    nodes = dec.channel_nodes()
    if c.num_channels != len(nodes):
        raise ValueError(f"expected {len(nodes)} channels, got {c.num_channels}")
    ops = level_ops if level_ops is not None else level_operators(op, dec)
    signals = []
    for coef, idx in zip(c.channels, nodes):
        coef = np.asarray(coef, dtype=np.float64)
        if coef.shape[0] != len(idx):
            raise ValueError("channel length does not match its node set")
        x = np.zeros((dec.n_nodes,) + coef.shape[1:])
        x[idx] = coef
        signals.append(x)
    for T in reversed(ops):
        signals = [apply_polynomial(fb.g0, T, signals[i]) + apply_polynomial(fb.g1, T, signals[i + 1])
                   for i in range(0, len(signals), 2)]
    return signals[0]
