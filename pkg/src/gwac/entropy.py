"""Byte-level entropy coding: varints, zigzag mapping, canonical Huffman.

A Huffman *block* is self-delimiting::

    u32 LE symbol count | code-length table | u32 LE payload bytes | payload

The table is either ``full`` (256 packed 4-bit lengths, 128 bytes) or
``compact`` (u16 LE entry count ``L`` followed by ``L`` packed 4-bit
lengths). Codewords are written MSB first and the payload is zero padded
to a byte boundary.
"""

from __future__ import annotations

import heapq
import struct

import numpy as np

MAX_CODE_LEN = 15


class DecodeError(ValueError):
    """Base class for bitstream decoding failures."""


class MalformedStreamError(DecodeError):
    pass


class TruncatedStreamError(DecodeError):
    pass


class MalformedTableError(DecodeError):
    pass


class CodewordOverrunError(DecodeError):
    pass


# -- varint / zigzag ---------------------------------------------------------

def zigzag(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    return ((v << 1) ^ (v >> 63)).astype(np.uint64)


def unzigzag(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.uint64)
    return ((u >> np.uint64(1)).astype(np.int64)) ^ (-(u & np.uint64(1)).astype(np.int64))


def varint_encode(values) -> np.ndarray:
    """Unsigned LEB128 bytes for every value, concatenated."""
    v = np.asarray(values, dtype=np.uint64).ravel()
    if len(v) == 0:
        return np.zeros(0, dtype=np.uint8)
    nbytes = np.ones(len(v), dtype=np.int64)
    for k in range(1, 10):
        nbytes += (v >> np.uint64(7 * k)) != 0
    width = int(nbytes.max())
    k = np.arange(width)
    groups = (v[:, None] >> (np.uint64(7) * k.astype(np.uint64))[None, :]) & np.uint64(0x7F)
    cont = (k[None, :] < (nbytes[:, None] - 1)).astype(np.uint64) << np.uint64(7)
    out = (groups | cont).astype(np.uint8)
    return out[k[None, :] < nbytes[:, None]]


def varint_decode(data, count: int | None = None) -> np.ndarray:
    b = np.frombuffer(bytes(data), dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    if len(b) == 0:
        out = np.zeros(0, dtype=np.uint64)
    else:
        if b[-1] & 0x80:
            raise TruncatedStreamError("varint stream ends inside a value")
        ends = np.flatnonzero((b & 0x80) == 0)
        starts = np.concatenate([[0], ends[:-1] + 1])
        if np.max(ends - starts) >= 10:
            raise MalformedStreamError("varint longer than 10 bytes")
        pos = np.arange(len(b)) - np.repeat(starts, ends - starts + 1)
        parts = (b & 0x7F).astype(np.uint64) << (np.uint64(7) * pos.astype(np.uint64))
        out = np.add.reduceat(parts, starts)
    if count is not None and len(out) != count:
        raise MalformedStreamError(f"expected {count} varints, found {len(out)}")
    return out


# -- canonical Huffman -------------------------------------------------------

def _limit_lengths(lengths: np.ndarray, freqs: np.ndarray, max_len: int) -> np.ndarray:
    """Clamp code lengths to ``max_len`` keeping the Kraft sum at most 1."""
    used = np.flatnonzero(lengths)
    bl = np.bincount(lengths[used], minlength=max_len + 1)
    for i in range(len(bl) - 1, max_len, -1):
        while bl[i] > 0:
            j = i - 2
            while bl[j] == 0:
                j -= 1
            bl[i] -= 2
            bl[i - 1] += 1
            bl[j + 1] += 2
            bl[j] -= 1
    # most frequent symbols get the shortest codes
    order = used[np.lexsort((used, -freqs[used]))]
    new = np.zeros_like(lengths)
    it = iter(order)
    for length in range(1, max_len + 1):
        for _ in range(bl[length]):
            new[next(it)] = length
    return new


def code_lengths(freqs, max_len: int = MAX_CODE_LEN) -> np.ndarray:
    """Huffman code lengths for a 256-symbol alphabet (0 = unused)."""
    freqs = np.asarray(freqs, dtype=np.int64)
    lengths = np.zeros(len(freqs), dtype=np.int64)
    present = np.flatnonzero(freqs)
    if len(present) == 0:
        return lengths
    if len(present) == 1:
        lengths[present[0]] = 1
        return lengths
    # (weight, tiebreak, symbols) with deterministic tie order
    heap = [(int(freqs[s]), int(s), [int(s)]) for s in present]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, t1, s1 = heapq.heappop(heap)
        w2, t2, s2 = heapq.heappop(heap)
        for s in s1 + s2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, min(t1, t2), s1 + s2))
    if lengths.max() > max_len:
        lengths = _limit_lengths(lengths, freqs, max_len)
    return lengths


def canonical_codes(lengths) -> np.ndarray:
    """Canonical codewords, assigned in (length, symbol) order."""
    lengths = np.asarray(lengths, dtype=np.int64)
    codes = np.zeros(len(lengths), dtype=np.int64)
    code, prev = 0, 0
    for s in np.lexsort((np.arange(len(lengths)), lengths)):
        length = int(lengths[s])
        if length == 0:
            continue
        code <<= length - prev
        codes[s] = code
        code += 1
        prev = length
    return codes


def _check_kraft(lengths):
    used = lengths[lengths > 0]
    if len(used) and np.sum(2.0 ** -used.astype(np.float64)) > 1.0 + 1e-12:
        raise MalformedTableError("code lengths violate the Kraft inequality")


def _pack_nibbles(lengths) -> bytes:
    v = np.asarray(lengths, dtype=np.uint8)
    if len(v) % 2:
        v = np.append(v, 0)
    return ((v[0::2] << 4) | v[1::2]).astype(np.uint8).tobytes()


def _unpack_nibbles(data: bytes, count: int) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    out = np.empty(2 * len(b), dtype=np.int64)
    out[0::2] = b >> 4
    out[1::2] = b & 0x0F
    return out[:count]


def write_bits(codes, lengths) -> bytes:
    """Concatenate MSB-first codewords and pad to a byte boundary."""
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        return b""
    owner = np.repeat(np.arange(len(lengths)), lengths)
    starts = np.cumsum(lengths) - lengths
    offset = np.arange(total) - starts[owner]
    bits = (np.asarray(codes, dtype=np.int64)[owner] >> (lengths[owner] - 1 - offset)) & 1
    return np.packbits(bits.astype(np.uint8)).tobytes()


def huffman_encode(symbols, table: str = "full") -> bytes:
    sym = np.asarray(symbols, dtype=np.uint8).ravel()
    lengths = code_lengths(np.bincount(sym, minlength=256))
    codes = canonical_codes(lengths)
    if table == "full":
        head = _pack_nibbles(lengths)
    elif table == "compact":
        L = int(np.flatnonzero(lengths).max()) + 1 if len(sym) else 0
        head = struct.pack("<H", L) + _pack_nibbles(lengths[:L])
    else:
        raise ValueError(f"unknown table format {table!r}")
    payload = write_bits(codes[sym], lengths[sym])
    return struct.pack("<I", len(sym)) + head + struct.pack("<I", len(payload)) + payload


def _read(buf: memoryview, pos: int, n: int, what: str) -> bytes:
    if pos + n > len(buf):
        raise TruncatedStreamError(f"stream truncated while reading {what}")
    return bytes(buf[pos:pos + n])


def huffman_decode(data, pos: int = 0, table: str = "full") -> tuple[np.ndarray, int]:
    """Decode one block starting at ``pos``; returns (symbols, next position)."""
    buf = memoryview(bytes(data))
    (count,) = struct.unpack("<I", _read(buf, pos, 4, "symbol count"))
    pos += 4
    if table == "full":
        lengths = _unpack_nibbles(_read(buf, pos, 128, "code table"), 256)
        pos += 128
    else:
        (L,) = struct.unpack("<H", _read(buf, pos, 2, "table size"))
        if L > 256:
            raise MalformedTableError("table lists more than 256 symbols")
        nb = (L + 1) // 2
        lengths = np.zeros(256, dtype=np.int64)
        lengths[:L] = _unpack_nibbles(_read(buf, pos + 2, nb, "code table"), L)
        pos += 2 + nb
    (nbytes,) = struct.unpack("<I", _read(buf, pos, 4, "payload size"))
    pos += 4
    payload = _read(buf, pos, nbytes, "payload")
    pos += nbytes
    _check_kraft(lengths)
    if count == 0:
        return np.zeros(0, dtype=np.uint8), pos
    if not lengths.any():
        raise MalformedTableError("empty code table for a non-empty block")
    return _decode_symbols(payload, lengths, count), pos


def _decode_symbols(payload: bytes, lengths: np.ndarray, count: int) -> np.ndarray:
    codes = canonical_codes(lengths)
    width = int(lengths.max())
    # prefix lookup table: every width-bit window maps to (symbol, length)
    lut_sym = np.full(1 << width, -1, dtype=np.int64)
    lut_len = np.zeros(1 << width, dtype=np.int64)
    for s in np.flatnonzero(lengths):
        span = width - int(lengths[s])
        lo = int(codes[s]) << span
        lut_sym[lo:lo + (1 << span)] = s
        lut_len[lo:lo + (1 << span)] = lengths[s]
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8)).astype(np.int64)
    nbits = len(bits)
    padded = np.concatenate([bits, np.zeros(width, dtype=np.int64)])
    window = np.zeros(nbits + 1, dtype=np.int64)
    for k in range(width):
        window = (window << 1) | padded[k:k + nbits + 1]
    window = window.tolist()
    sym_l, len_l = lut_sym.tolist(), lut_len.tolist()
    out = [0] * count
    p = 0
    for i in range(count):
        if p >= nbits:
            raise CodewordOverrunError("payload exhausted before all symbols were read")
        w = window[p]
        s = sym_l[w]
        if s < 0:
            raise CodewordOverrunError("bit pattern matches no codeword")
        p += len_l[w]
        if p > nbits:
            raise CodewordOverrunError("codeword runs past the end of the payload")
        out[i] = s
    return np.array(out, dtype=np.uint8)
