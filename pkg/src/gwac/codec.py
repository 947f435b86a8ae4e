"""Weighted-adjacency codec and its ``GWAC`` bitstream.

Topology is coded losslessly. The edge-weight vector has its mean removed
(sent as one quantized offset), and the residual is transformed by the
line-graph filter bank, sparsified, quantized and Huffman coded. The decoder
rebuilds the transform from the decoded topology plus the header, so the
weights section never has to describe the graph.

Layout (little endian)::

    "GWAC" | version u8 | flags u8 | n u32 | m u32 | step f64 | rho f64 | K u8
    | topology: u32 length + payload | weights: u32 length + payload

``flags`` bit 0 is the operator mode (0 line, 1 edge) and bits 1-2 hold
``m_max``.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .entropy import (DecodeError, MalformedStreamError, TruncatedStreamError, huffman_decode,
                      huffman_encode, unzigzag, varint_decode, varint_encode, zigzag)
from .filterbank import (BiorFilterBank, BipartiteDecomposition, SubbandCoefficients, analyze,
                         design_biorthogonal, harary_decompose, level_operators, synthesize)
from .graph import UGraph
from .linegraph import EdgeOperator, LineGraph, build_operator, line_graph

MAGIC = b"GWAC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBIIddB")
MIN_WEIGHT = 1e-9
QMAX = 2 ** 31 - 1


class GapOverflowError(DecodeError):
    pass


class VersionError(DecodeError):
    pass


class SectionError(DecodeError):
    """A section's payload is inconsistent with the header."""

    def __init__(self, section: str, reason):
        super().__init__(f"{section} section: {reason}")
        self.section = section


class QuantizationOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class CodecConfig:
    quant_step: float = 0.01
    keep_fraction: float = 1.0
    operator_mode: str = "line"
    filter_order: int = 8
    m_max: int = 2
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if not self.quant_step > 0:
            raise ValueError("quant_step must be > 0")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must lie in (0, 1]")
        if self.operator_mode not in ("line", "edge"):
            raise ValueError("operator_mode must be 'line' or 'edge'")
        if self.filter_order < 2 or self.filter_order % 2 or self.filter_order > 255:
            raise ValueError("filter_order must be an even integer in [2, 254]")
        if not 1 <= self.m_max <= 3:
            raise ValueError("m_max must be 1, 2 or 3 (two header bits)")


# -- topology ----------------------------------------------------------------

def _flat_index(edges, n: int) -> np.ndarray:
    i, j = edges[:, 0], edges[:, 1]
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def encode_topology(edges, n: int) -> bytes:
    """Gap-coded upper-triangular indices, varint bytes, Huffman coded."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    t = _flat_index(edges, n)
    gaps = np.diff(t, prepend=0) if len(t) else t
    if len(t) > 1 and np.any(gaps[1:] <= 0):
        raise ValueError("edges are not in canonical order")
    return huffman_encode(varint_encode(gaps.astype(np.uint64)), table="compact")


def decode_topology(data, n: int, m: int) -> np.ndarray:
    symbols, end = huffman_decode(data, 0, table="compact")
    if end != len(data):
        raise MalformedStreamError("trailing bytes after topology block")
    gaps = varint_decode(symbols, count=m).astype(np.int64) if m else np.zeros(0, np.int64)
    if m == 0 and len(symbols):
        raise MalformedStreamError("topology payload present for an edgeless graph")
    if np.any(gaps < 0):
        raise GapOverflowError("gap exceeds the index range")
    if m > 1 and np.any(gaps[1:] == 0):
        raise MalformedStreamError("repeated edge index")
    t = np.cumsum(gaps)
    total = n * (n - 1) // 2
    if m and (t[-1] >= total or t[-1] < 0):
        raise GapOverflowError(f"edge index {t[-1]} beyond n(n-1)/2 = {total}")
    # invert t = i n - i (i+1) / 2 + (j - i - 1) via row offsets
    row_start = np.arange(n) * n - np.arange(n) * (np.arange(n) + 1) // 2
    i = np.searchsorted(row_start, t, side="right") - 1
    j = t - row_start[i] + i + 1
    return np.column_stack([i, j]).astype(np.int64)


# -- sparsification, quantization, entropy coding ----------------------------

def keep_count(rho: float, size: int) -> int:
    return min(size, math.ceil(round(rho * size, 9)))


def nla_threshold(c, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``ceil(rho * len)`` largest magnitudes; ties go to lower index."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    v = c.flat() if isinstance(c, SubbandCoefficients) else np.asarray(c, dtype=np.float64)
    v = v.ravel()
    k = keep_count(rho, len(v))
    order = np.argsort(-np.abs(v), kind="stable")
    bitmap = np.zeros(len(v), dtype=bool)
    bitmap[order[:k]] = True
    return np.where(bitmap, v, 0.0), bitmap


def quantize(v, step: float) -> np.ndarray:
    """Uniform quantizer, ties rounded away from zero."""
    if not step > 0:
        raise ValueError("step must be > 0")
    v = np.asarray(v, dtype=np.float64)
    mag = np.floor(np.abs(v) / step + 0.5)
    if mag.size and (not np.all(np.isfinite(mag)) or mag.max() > QMAX):
        raise QuantizationOverflow("value exceeds the 2^31 - 1 quantization bins")
    return (np.sign(v) * mag).astype(np.int64)


def dequantize(q, step: float) -> np.ndarray:
    return np.asarray(q, dtype=np.float64) * step


def _runs(bitmap: np.ndarray) -> np.ndarray:
    ones = np.flatnonzero(bitmap)
    gaps = np.diff(ones, prepend=-1) - 1
    # a run r is written as r // 255 escapes (255) followed by r % 255
    reps = gaps // 255 + 1
    out = np.full(int(reps.sum()), 255, dtype=np.uint8)
    out[np.cumsum(reps) - 1] = gaps % 255
    return out


def entropy_encode(q, bitmap=None) -> bytes:
    """Zero-run coded significance map followed by zigzag-varint values."""
    q = np.asarray(q, dtype=np.int64).ravel()
    bitmap = q != 0 if bitmap is None else np.asarray(bitmap, dtype=bool).ravel()
    if not np.array_equal(bitmap, q != 0):
        raise ValueError("q must be nonzero exactly where the bitmap is set")
    values = varint_encode(zigzag(q[bitmap]))
    return huffman_encode(_runs(bitmap)) + huffman_encode(values)


def entropy_decode(data, length: int) -> np.ndarray:
    runs, pos = huffman_decode(data, 0)
    value_bytes, pos = huffman_decode(data, pos)
    if pos != len(data):
        raise MalformedStreamError("trailing bytes after weights blocks")
    r = runs.astype(np.int64)
    ends = r != 255
    # positions: each terminating symbol closes a run; escapes add 255 zeros
    seg = np.cumsum(np.concatenate([[0], ends[:-1]])) if len(r) else r
    total_zero = np.bincount(seg, weights=r, minlength=int(ends.sum())) if len(r) else r
    nz = int(ends.sum())
    if len(r) and not ends[-1]:
        raise MalformedStreamError("run list ends with an escape")
    positions = np.cumsum(total_zero[:nz].astype(np.int64) + 1) - 1
    if nz and positions[-1] >= length:
        raise MalformedStreamError("significance map runs past the signal length")
    values = unzigzag(varint_decode(value_bytes, count=nz)) if nz else np.zeros(0, np.int64)
    if nz and np.any(values == 0):
        raise MalformedStreamError("zero value at a significant position")
    q = np.zeros(length, dtype=np.int64)
    q[positions] = values
    return q


# -- transform construction shared by encoder and decoder --------------------

@dataclass(frozen=True, eq=False)
class EdgeTransform:
    line: LineGraph
    operator: EdgeOperator
    decomposition: BipartiteDecomposition
    bank: BiorFilterBank
    level_ops: list = field(repr=False)

    def analyze(self, f) -> SubbandCoefficients:
        return analyze(self.operator, self.decomposition, self.bank, f, self.level_ops)

    def synthesize(self, c: SubbandCoefficients) -> np.ndarray:
        return synthesize(self.operator, self.decomposition, self.bank, c, self.level_ops)

    @cached_property
    def dc_response(self) -> np.ndarray:
        """Flattened analysis of the all-ones signal."""
        return self.analyze(np.ones(self.line.node_count)).flat()

    def subbands(self, flat) -> SubbandCoefficients:
        nodes = self.decomposition.channel_nodes()
        return SubbandCoefficients([np.zeros(len(x)) for x in nodes], nodes).with_flat(flat)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        A = self.line.adjacency
        M = self.operator.matrix
        for arr in (A.indptr, A.indices, A.data, M.indptr, M.indices, M.data,
                    self.decomposition.colors, self.bank.h0, self.bank.g0):
            h.update(np.ascontiguousarray(arr).tobytes())
        for T in self.level_ops:
            h.update(T.indices.tobytes())
            h.update(T.data.tobytes())
        return h.hexdigest()


@lru_cache(maxsize=16)
def _bank(K: int) -> BiorFilterBank:
    return design_biorthogonal(K)


def edge_transform(g: UGraph, cfg: CodecConfig) -> EdgeTransform:
    """Transform machinery built from the binary topology of ``g`` only."""
    topo = g.binary()
    lg = line_graph(topo)
    op = build_operator(lg, topo, cfg.operator_mode)
    dec = harary_decompose(lg, cfg.m_max)
    return EdgeTransform(lg, op, dec, _bank(cfg.filter_order), level_operators(op, dec))


# -- bitstream ---------------------------------------------------------------

@dataclass(frozen=True)
class Bitstream:
    n: int
    m: int
    config: CodecConfig
    topology: bytes
    weights: bytes

    @property
    def header_bytes(self) -> int:
        return _HEADER.size + 8

    @property
    def topology_bytes(self) -> int:
        return len(self.topology)

    @property
    def weights_bytes(self) -> int:
        return len(self.weights)

    @property
    def total_bytes(self) -> int:
        return self.header_bytes + self.topology_bytes + self.weights_bytes

    def to_bytes(self) -> bytes:
        c = self.config
        flags = (1 if c.operator_mode == "edge" else 0) | (c.m_max << 1)
        head = _HEADER.pack(MAGIC, c.format_version, flags, self.n, self.m, c.quant_step,
                            c.keep_fraction, c.filter_order)
        return (head + struct.pack("<I", len(self.topology)) + self.topology
                + struct.pack("<I", len(self.weights)) + self.weights)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        data = bytes(data)
        if len(data) < _HEADER.size:
            raise TruncatedStreamError("header truncated")
        magic, version, flags, n, m, step, rho, K = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise SectionError("header", "bad magic")
        if version != FORMAT_VERSION:
            raise VersionError(f"unsupported format version {version}")
        if flags & ~0b111:
            raise SectionError("header", f"unknown flag bits {flags:#x}")
        try:
            cfg = CodecConfig(step, rho, "edge" if flags & 1 else "line", K, (flags >> 1) & 3,
                              version)
        except ValueError as exc:
            raise SectionError("header", exc) from None
        pos = _HEADER.size
        sections = []
        for name in ("topology", "weights"):
            if pos + 4 > len(data):
                raise SectionError(name, "length field truncated")
            (size,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if pos + size > len(data):
                raise SectionError(name, "payload truncated")
            sections.append(data[pos:pos + size])
            pos += size
        if pos != len(data):
            raise SectionError("weights", "trailing bytes after the last section")
        return cls(n, m, cfg, sections[0], sections[1])


def _near_integer(x, tol: float = 1e-6) -> bool:
    return bool(np.all(np.abs(x - np.round(x)) <= tol))


def _offset(f, a, step: float, tr: "EdgeTransform", rho: float) -> int:
    """Quantized mean offset, chosen so that re-encoding a decoded graph is stable.

    ``a`` is the flattened analysis of ``f``. A decoded graph has lattice coefficients for exactly one offset when the
    DC response is not integral, and that offset is kept. With an integral
    DC response every offset decodes to the same graph at ``rho = 1``, so
    the offset is read off that decoded graph's mean instead.
    """
    base = int(quantize(np.mean(f), step))
    d = tr.dc_response
    if not _near_integer(d):
        for cand in (base, base - 1, base + 1):
            if _near_integer(a / step - cand * d):
                return cand
        return base
    kept, _ = nla_threshold(a - base * step * d, rho)
    rec = base * step + tr.synthesize(tr.subbands(dequantize(quantize(kept, step), step)))
    # fixed tie bias so half-bin means do not flip on rounding noise
    return int(np.floor(np.mean(rec) / step + 0.5 + 1e-9))


def encode_weights(g: UGraph, cfg: CodecConfig, transform: EdgeTransform | None = None) -> bytes:
    """Quantized mean offset (zigzag varint) followed by the coefficient blocks."""
    if g.num_edges == 0:
        return bytes(varint_encode(zigzag([0]))) + entropy_encode(np.zeros(0, np.int64))
    tr = transform or edge_transform(g, cfg)
    step = cfg.quant_step
    a = tr.analyze(g.weights).flat()
    offset = _offset(g.weights, a, step, tr, cfg.keep_fraction)
    # analysis is linear, so the offset shift is one vector update
    c = a - offset * step * tr.dc_response
    kept, _ = nla_threshold(c, cfg.keep_fraction)
    q = quantize(kept, step)
    return bytes(varint_encode(zigzag([offset]))) + entropy_encode(q, q != 0)


def decode_weights(data: bytes, m: int) -> tuple[int, np.ndarray]:
    """Inverse of :func:`encode_weights` up to the synthesis step."""
    b = np.frombuffer(bytes(data), dtype=np.uint8)
    stop = np.flatnonzero(b < 0x80)
    if len(stop) == 0:
        raise TruncatedStreamError("offset varint truncated")
    head = int(stop[0]) + 1
    offset = int(unzigzag(varint_decode(b[:head], count=1))[0])
    return offset, entropy_decode(bytes(data[head:]), m)


def compress(g: UGraph, cfg: CodecConfig = CodecConfig(),
             transform: EdgeTransform | None = None) -> Bitstream:
    return Bitstream(g.n, g.num_edges, cfg, encode_topology(g.edges, g.n),
                     encode_weights(g, cfg, transform))


def decompress(b, transform: EdgeTransform | None = None) -> UGraph:
    if not isinstance(b, Bitstream):
        b = Bitstream.from_bytes(b)
    try:
        edges = decode_topology(b.topology, b.n, b.m)
    except DecodeError as exc:
        raise SectionError("topology", exc) from exc
    topo = UGraph(b.n, edges, np.ones(b.m))
    try:
        offset, q = decode_weights(b.weights, b.m)
    except DecodeError as exc:
        raise SectionError("weights", exc) from exc
    if b.m == 0:
        return topo
    tr = transform or edge_transform(topo, b.config)
    step = b.config.quant_step
    f = offset * step + tr.synthesize(tr.subbands(dequantize(q, step)))
    return topo.with_weights(np.maximum(f, MIN_WEIGHT))
