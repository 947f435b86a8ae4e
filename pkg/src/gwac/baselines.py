"""Direct adjacency-matrix compressors used as comparison points.

All of them share the codec's quantizer and entropy coder, so byte counts
are comparable. None of them transmits topology separately; they code the
full ``N x N`` matrix (or its factors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.sparse as sp

from .codec import dequantize, encode_topology, entropy_encode, nla_threshold, quantize
from .filterbank import (BiorFilterBank, analyze, design_biorthogonal, harary_decompose,
                         level_operators, synthesize)
from .graph import UGraph, binary_adjacency, sym_normalized_laplacian


@dataclass(frozen=True, eq=False)
class BaselineResult:
    method: str
    reconstructed: np.ndarray
    bytes: int
    operating_point: float


def _dense(W) -> np.ndarray:
    return W.toarray() if sp.issparse(W) else np.asarray(W, dtype=np.float64)


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _code_flat(coeffs: np.ndarray, rho: float, step: float) -> tuple[np.ndarray, int]:
    """NLA + quantize + entropy code; returns dequantized values and byte count."""
    kept, _ = nla_threshold(coeffs, rho)
    q = quantize(kept, step)
    return dequantize(q, step), len(entropy_encode(q))


def direct_dct(W, rho: float, step: float = 0.01) -> BaselineResult:
    """Column-wise orthonormal DCT-II with a global NLA threshold."""
    W = _dense(W)
    C = scipy.fft.dct(W, type=2, norm="ortho", axis=0)
    flat, nbytes = _code_flat(C.ravel(order="F"), rho, step)
    rec = scipy.fft.idct(flat.reshape(W.shape, order="F"), type=2, norm="ortho", axis=0)
    return BaselineResult("direct_dct", _symmetrize(rec), nbytes, rho)


def truncated_svd(W, r: int):
    W = _dense(W)
    if not 1 <= r <= W.shape[0]:
        raise ValueError("rank must lie in [1, N]")
    U, s, Vt = np.linalg.svd(W)
    return U[:, :r], s[:r], Vt[:r].T


def direct_lra(W, r: int, step: float = 0.01) -> BaselineResult:
    """Rank-``r`` SVD truncation with quantized factors ``U``, ``sigma``, ``V``."""
    U, s, V = truncated_svd(W, r)
    parts = []
    nbytes = 0
    for factor in (U, s, V):
        q = quantize(factor.ravel(order="F"), step)
        nbytes += len(entropy_encode(q))
        parts.append(dequantize(q, step).reshape(factor.shape, order="F"))
    Uq, sq, Vq = parts
    return BaselineResult("direct_lra", _symmetrize((Uq * sq) @ Vq.T), nbytes, r)


def direct_gfb(W, g_binary: UGraph, fb: BiorFilterBank | None = None, rho: float = 1.0,
               step: float = 0.01, m_max: int = 2) -> BaselineResult:
    """Every column of ``W`` analyzed as a node signal on the original graph."""
    W = _dense(W)
    fb = fb or design_biorthogonal(8)
    A = binary_adjacency(g_binary)
    op = sym_normalized_laplacian(A)
    dec = harary_decompose(A, m_max)
    ops = level_operators(op, dec)
    sub = analyze(op, dec, fb, W, ops)
    coeffs = sub.flat()  # row = (channel, position), column = source column
    flat, nbytes = _code_flat(coeffs.ravel(order="F"), rho, step)
    rec_sub = sub.with_flat(flat.reshape(coeffs.shape, order="F"))
    rec = synthesize(op, dec, fb, rec_sub, ops)
    return BaselineResult("direct_gfb", _symmetrize(rec), nbytes, rho)


def binary_baseline(g: UGraph) -> BaselineResult:
    """All weights replaced by 1; only the topology is stored."""
    nbytes = len(encode_topology(g.edges, g.n))
    return BaselineResult("binary", binary_adjacency(g).toarray(), nbytes, 1.0)

