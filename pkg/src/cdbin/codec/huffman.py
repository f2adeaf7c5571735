"""Canonical Huffman tables and the baseline entropy-coded segment."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import tables
from .serial import EOB, ZRL, rle_ac
from .types import CodecError, CorruptStreamError, TruncatedStreamError

# Category limits for 8-bit baseline coding.
MAX_DC_CATEGORY = 11
MAX_AC_CATEGORY = 10


@dataclass(frozen=True)
class HuffTable:
    table_class: int  # 0 = DC, 1 = AC
    destination: int
    bits: tuple[int, ...]  # number of codes of each length 1..16
    values: bytes

    def __post_init__(self):
        if self.table_class not in (0, 1):
            raise CorruptStreamError("table class must be 0 (DC) or 1 (AC)")
        if len(self.bits) != 16:
            raise CorruptStreamError("BITS must have 16 entries")
        if sum(self.bits) != len(self.values) or len(self.values) > 256:
            raise CorruptStreamError("BITS counts do not match the symbol list")
        # Generating the codes checks the Kraft sum and the all-ones rule.
        self.codes  # noqa: B018

    @cached_property
    def codes(self) -> dict[int, tuple[int, int]]:
        """symbol -> (code, length), assigned canonically."""
        out = {}
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(self.bits[length - 1]):
                if code >= (1 << length) - (1 if length == 16 else 0):
                    raise CorruptStreamError("Huffman BITS over-subscribe the code space")
                out[self.values[k]] = (code, length)
                code += 1
                k += 1
            code <<= 1
        return out

    @cached_property
    def lookup(self) -> tuple[list[int], list[int]]:
        """16-bit-prefix tables mapping to (symbol, length); length 0 marks an invalid code."""
        sym = np.zeros(1 << 16, dtype=np.int64)
        length = np.zeros(1 << 16, dtype=np.int64)
        for s, (code, n) in self.codes.items():
            lo = code << (16 - n)
            hi = (code + 1) << (16 - n)
            sym[lo:hi] = s
            length[lo:hi] = n
        return sym.tolist(), length.tolist()


def default_tables(chroma: bool = False) -> tuple[HuffTable, HuffTable]:
    """The standard (DC, AC) pair for luminance, or chrominance if ``chroma``."""
    if chroma:
        dc, ac = tables.DC_CHROMINANCE, tables.AC_CHROMINANCE
        dest = 1
    else:
        dc, ac = tables.DC_LUMINANCE, tables.AC_LUMINANCE
        dest = 0
    return HuffTable(0, dest, dc[0], dc[1]), HuffTable(1, dest, ac[0], ac[1])


def magnitude_category(v: int) -> int:
    return abs(v).bit_length()


class BitWriter:
    """MSB-first bit packer with 0xFF byte stuffing."""

    def __init__(self):
        self.out = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value: int, nbits: int):
        if nbits == 0:
            return
        self._acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        self._nbits += nbits
        while self._nbits >= 8:
            self._nbits -= 8
            byte = (self._acc >> self._nbits) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)
        self._acc &= (1 << self._nbits) - 1

    def flush(self) -> bytes:
        """Pad the final byte with 1-bits and return the stuffed data."""
        if self._nbits:
            pad = 8 - self._nbits
            self.write((1 << pad) - 1, pad)
        return bytes(self.out)


def _write_value(w: BitWriter, v: int, size: int):
    # Negative values are sent as v - 1 in `size` bits (ones' complement form).
    w.write(v if v >= 0 else v + (1 << size) - 1, size)


def encode_block(w: BitWriter, zz, prev_dc: int, dc_table: HuffTable, ac_table: HuffTable) -> int:
    """Append one zig-zag ordered block; returns its DC value for prediction."""
    dc = int(zz[0])
    diff = dc - prev_dc
    size = magnitude_category(diff)
    if size > MAX_DC_CATEGORY:
        raise CodecError(f"DC difference {diff} exceeds baseline range")
    code, n = dc_table.codes[size]
    w.write(code, n)
    _write_value(w, diff, size)
    ac_codes = ac_table.codes
    for run, v in rle_ac(zz[1:]):
        if (run, v) == EOB or (run, v) == ZRL:
            code, n = ac_codes[run << 4]
            w.write(code, n)
            continue
        size = magnitude_category(v)
        if size > MAX_AC_CATEGORY:
            raise CodecError(f"AC coefficient {v} exceeds baseline range")
        code, n = ac_codes[(run << 4) | size]
        w.write(code, n)
        _write_value(w, v, size)
    return dc


def entropy_encode(components, table_pairs, restart_interval: int = 0) -> bytes:
    """Huffman-code a scan.

    ``components`` holds one (n_blocks, 64) zig-zag array per scan component,
    all with the same number of blocks. With several components the scan is
    interleaved one block per component per MCU (4:4:4). Restart markers are
    emitted every ``restart_interval`` MCUs when it is positive.
    """
    comps = [np.asarray(c, dtype=np.int64).reshape(-1, 64) for c in components]
    if not comps or comps[0].shape[0] == 0:
        raise CodecError("cannot entropy-code an empty image")
    n = comps[0].shape[0]
    if any(c.shape[0] != n for c in comps):
        raise CodecError("interleaved components must have equal block counts")
    rows = [c.tolist() for c in comps]
    w = BitWriter()
    out = bytearray()
    preds = [0] * len(comps)
    rst = 0
    for i in range(n):
        if restart_interval and i and i % restart_interval == 0:
            out += w.flush()
            out += bytes((0xFF, 0xD0 + rst))
            rst = (rst + 1) % 8
            w = BitWriter()
            preds = [0] * len(comps)
        for ci, (dc_t, ac_t) in enumerate(table_pairs):
            preds[ci] = encode_block(w, rows[ci][i], preds[ci], dc_t, ac_t)
    out += w.flush()
    return bytes(out)


class BitReader:
    """MSB-first reader over already un-stuffed entropy data."""

    def __init__(self, data: bytes):
        self.nbits = len(data) * 8
        # 1-bit padding lets peeks run past the end; overruns are checked later.
        self.data = bytes(data) + b"\xff\xff\xff\xff"
        self.pos = 0

    def peek16(self) -> int:
        p = self.pos
        i = p >> 3
        d = self.data
        word = (d[i] << 16) | (d[i + 1] << 8) | d[i + 2]
        return (word >> (8 - (p & 7))) & 0xFFFF

    def read(self, n: int) -> int:
        if n == 0:
            return 0
        v = self.peek16() >> (16 - n)
        self.pos += n
        return v

    def check(self):
        if self.pos > self.nbits:
            raise TruncatedStreamError("entropy-coded data ended mid-block")


def _extend(v: int, size: int) -> int:
    if size and v < (1 << (size - 1)):
        return v - (1 << size) + 1
    return v


def decode_symbol(r: BitReader, lut) -> int:
    syms, lens = lut
    key = r.peek16()
    n = lens[key]
    if n == 0:
        if r.pos + 16 > r.nbits:
            raise TruncatedStreamError("entropy-coded data ended before the last block")
        raise CorruptStreamError(f"invalid Huffman code at bit {r.pos}")
    r.pos += n
    return syms[key]


def decode_block(r: BitReader, out, prev_dc: int, dc_lut, ac_lut) -> int:
    """Fill ``out`` (a zeroed list of 64) in zig-zag order; returns the DC value."""
    size = decode_symbol(r, dc_lut)
    if size > MAX_DC_CATEGORY:
        raise CorruptStreamError(f"DC category {size} out of range")
    dc = prev_dc + _extend(r.read(size), size)
    out[0] = dc
    k = 1
    while k < 64:
        rs = decode_symbol(r, ac_lut)
        run, size = rs >> 4, rs & 15
        if size == 0:
            if run == 15:
                k += 16
                continue
            if run == 0:
                break
            raise CorruptStreamError(f"invalid AC symbol 0x{rs:02x}")
        k += run
        if k > 63:
            raise CorruptStreamError("AC run overflows the block")
        out[k] = _extend(r.read(size), size)
        k += 1
    if k > 64:
        raise CorruptStreamError("zero-run overflows the block")
    return dc


def unstuff(data: bytes) -> bytes:
    return data.replace(b"\xff\x00", b"\xff")


def entropy_decode(intervals, table_pairs, n_blocks: int, restart_interval: int = 0) -> list[np.ndarray]:
    """Decode a scan back to one (n_blocks, 64) zig-zag array per component.

    ``intervals`` is the list of stuffed byte chunks between restart markers
    (a single chunk when restarts are absent); DC predictors reset at each.
    """
    if n_blocks <= 0:
        raise CodecError("scan has no blocks")
    per_chunk = restart_interval if restart_interval > 0 else n_blocks
    ncomp = len(table_pairs)
    luts = [(dc.lookup, ac.lookup) for dc, ac in table_pairs]
    result = [[None] * n_blocks for _ in range(ncomp)]
    i = 0
    for chunk in intervals:
        if i >= n_blocks:
            break
        r = BitReader(unstuff(chunk))
        preds = [0] * ncomp
        stop = min(n_blocks, i + per_chunk)
        while i < stop:
            for ci in range(ncomp):
                blk = [0] * 64
                preds[ci] = decode_block(r, blk, preds[ci], *luts[ci])
                result[ci][i] = blk
            i += 1
        r.check()
    if i < n_blocks:
        raise TruncatedStreamError(f"scan ended after {i} of {n_blocks} MCUs")
    return [np.asarray(rows, dtype=np.int32) for rows in result]
