"""Baseline JFIF streams: encoder, marker parser, partial and full decoders."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .huffman import HuffTable, default_tables, entropy_decode, entropy_encode
from .tables import ZIGZAG
from .transforms import (
    _ycbcr_planes_to_rgb,
    fdct_8x8,
    idct_8x8_int,
    merge_blocks,
    quantize_block,
    rgb_to_ycbcr,
    scale_quant_table,
    split_blocks,
)
from .types import (
    CodecError,
    CoefficientTensor,
    CorruptStreamError,
    PixelImage,
    QuantTable,
    TruncatedStreamError,
    UnsupportedStreamError,
)

SOI, EOI = 0xD8, 0xD9
SOF0, SOF1, DHT, DQT, DRI, SOS = 0xC0, 0xC1, 0xC4, 0xDB, 0xDD, 0xDA
APP0, COM = 0xE0, 0xFE
RST0 = 0xD0


@dataclass
class JpegCoefficients:
    """Result of partial decoding: per-component quantized coefficients."""

    width: int
    height: int
    components: list[CoefficientTensor]
    tables: dict[int, QuantTable] = field(default_factory=dict)

    def __eq__(self, other):
        return (
            isinstance(other, JpegCoefficients)
            and (self.width, self.height) == (other.width, other.height)
            and self.components == other.components
        )


# -- writing -----------------------------------------------------------------

def _segment(marker: int, payload: bytes) -> bytes:
    if len(payload) + 2 > 0xFFFF:
        raise CodecError("marker segment too long")
    return bytes((0xFF, marker)) + struct.pack(">H", len(payload) + 2) + payload


def _app0() -> bytes:
    return _segment(APP0, b"JFIF\x00" + bytes((1, 1, 0)) + struct.pack(">HHBB", 1, 1, 0, 0))


def _dqt(dest: int, table: QuantTable) -> bytes:
    if max(table.entries) > 255:
        return _segment(DQT, bytes((0x10 | dest,)) + struct.pack(">64H", *table.entries))
    return _segment(DQT, bytes((dest,)) + bytes(table.entries))


def _dht(t: HuffTable) -> bytes:
    return _segment(DHT, bytes((t.table_class << 4 | t.destination,)) + bytes(t.bits) + t.values)


def encode_coefficients(coeffs: JpegCoefficients, restart_interval: int = 0) -> bytes:
    """Wrap already-quantized coefficients into a baseline JFIF stream.

    Components 1 (luminance) use table slot 0; further components use slot 1.
    """
    comps = coeffs.components
    if len(comps) not in (1, 3):
        raise CodecError("only 1- or 3-component images are supported")
    hb, wb = comps[0].blocks_high, comps[0].blocks_wide
    if hb * wb == 0:
        raise CodecError("cannot encode an image with no blocks")
    if any((c.blocks_high, c.blocks_wide) != (hb, wb) for c in comps):
        raise CodecError("all components must share one block grid (4:4:4)")
    if not (coeffs.width <= 8 * wb and coeffs.height <= 8 * hb):
        raise CodecError("image size exceeds the coefficient grid")

    out = bytearray((0xFF, SOI))
    out += _app0()
    slots = [0] + [1] * (len(comps) - 1)
    written = set()
    for c, slot in zip(comps, slots):
        if slot not in written:
            out += _dqt(slot, c.table)
            written.add(slot)
    sof = struct.pack(">BHHB", 8, coeffs.height, coeffs.width, len(comps))
    for i, slot in enumerate(slots):
        sof += bytes((i + 1, 0x11, slot))
    out += _segment(SOF0, sof)
    pairs = [default_tables(chroma=bool(slot)) for slot in slots]
    for slot in sorted(set(slots)):
        for t in default_tables(chroma=bool(slot)):
            out += _dht(t)
    if restart_interval:
        out += _segment(DRI, struct.pack(">H", restart_interval))
    sos = bytes((len(comps),))
    for i, slot in enumerate(slots):
        sos += bytes((i + 1, slot << 4 | slot))
    out += _segment(SOS, sos + bytes((0, 63, 0)))
    out += entropy_encode([c.grid.reshape(-1, 64) for c in comps], pairs, restart_interval)
    out += bytes((0xFF, EOI))
    return bytes(out)


def quantized_coefficients(img: PixelImage, quality: int = 50) -> JpegCoefficients:
    """Run the pixel-side pipeline: color transform, split, DCT, quantize."""
    if img.width % 8 or img.height % 8:
        raise ValueError(f"image {img.width}x{img.height} is not a multiple of 8; pad it first")
    if img.width == 0 or img.height == 0:
        raise CodecError("cannot encode an empty image")
    planes = rgb_to_ycbcr(img).samples if img.components == 3 else img.samples
    hb, wb = img.height // 8, img.width // 8
    comps = []
    for ci in range(img.components):
        table = scale_quant_table("luminance" if ci == 0 else "chrominance", quality)
        q = quantize_block(fdct_8x8(split_blocks(planes[:, :, ci])), table)
        grid = q.reshape(hb, wb, 64)[:, :, ZIGZAG]
        comps.append(CoefficientTensor(grid, table, component=ci + 1))
    return JpegCoefficients(img.width, img.height, comps, {0: comps[0].table})


def encode_image(img: PixelImage, quality: int = 50, restart_interval: int = 0) -> bytes:
    """Baseline JFIF encoding; grayscale uses one component, color uses 4:4:4 YCbCr."""
    return encode_coefficients(quantized_coefficients(img, quality), restart_interval)


def encode_any_size(img: PixelImage, quality: int = 50, restart_interval: int = 0) -> bytes:
    """Encode an image of any size: edge pixels are replicated out to whole
    8x8 blocks and the true size goes into the frame header, so decoders
    crop the replicated border away."""
    h, w = img.height, img.width
    ph, pw = -(-h // 8) * 8, -(-w // 8) * 8
    if (ph, pw) == (h, w):
        return encode_image(img, quality, restart_interval)
    padded = np.pad(img.samples, ((0, ph - h), (0, pw - w), (0, 0)), mode="edge")
    coeffs = quantized_coefficients(PixelImage(padded), quality)
    coeffs = JpegCoefficients(w, h, coeffs.components, coeffs.tables)
    return encode_coefficients(coeffs, restart_interval)


# -- parsing -----------------------------------------------------------------

def _parse_dqt(payload: bytes, tables: dict):
    i = 0
    while i < len(payload):
        pq, tq = payload[i] >> 4, payload[i] & 15
        i += 1
        if pq == 0:
            entries = tuple(payload[i:i + 64])
            i += 64
        elif pq == 1:
            entries = struct.unpack(">64H", payload[i:i + 128])
            i += 128
        else:
            raise CorruptStreamError(f"bad DQT precision {pq}")
        if len(entries) != 64:
            raise TruncatedStreamError("DQT segment truncated")
        try:
            tables[tq] = QuantTable(tuple(entries))
        except ValueError as e:
            raise CorruptStreamError(str(e)) from None


def _parse_dht(payload: bytes, dc: dict, ac: dict):
    i = 0
    while i < len(payload):
        tc, th = payload[i] >> 4, payload[i] & 15
        bits = tuple(payload[i + 1:i + 17])
        n = sum(bits)
        values = payload[i + 17:i + 17 + n]
        if len(bits) != 16 or len(values) != n:
            raise TruncatedStreamError("DHT segment truncated")
        try:
            t = HuffTable(tc, th, bits, bytes(values))
        except ValueError as e:
            raise CorruptStreamError(f"bad Huffman table: {e}") from None
        (dc if tc == 0 else ac)[th] = t
        i += 17 + n


def _scan_data(data: bytes, start: int) -> tuple[list[bytes], int]:
    """Split entropy data at RSTn markers; returns (chunks, offset of next marker)."""
    chunks = []
    begin = start
    i = start
    n = len(data)
    while True:
        j = data.find(b"\xff", i)
        if j < 0 or j + 1 >= n:
            raise TruncatedStreamError("entropy-coded data has no terminating marker")
        nxt = data[j + 1]
        if nxt == 0x00 or nxt == 0xFF:
            # Stuffed byte, or fill bytes preceding a marker.
            i = j + 1 if nxt == 0xFF else j + 2
            continue
        if RST0 <= nxt <= RST0 + 7:
            chunks.append(data[begin:j])
            begin = i = j + 2
            continue
        chunks.append(data[begin:j])
        return chunks, j


def partial_decode(stream: bytes) -> JpegCoefficients:
    """Entropy-decode a baseline stream to quantized coefficients.

    No dequantization and no inverse DCT are applied.
    """
    data = bytes(stream)
    if len(data) < 4 or data[:2] != b"\xff\xd8":
        raise CorruptStreamError("missing SOI marker")
    qtables: dict[int, QuantTable] = {}
    dc_tables: dict[int, HuffTable] = {}
    ac_tables: dict[int, HuffTable] = {}
    frame = None
    restart = 0
    grids: dict[int, np.ndarray] = {}
    pos = 2
    while True:
        if pos + 2 > len(data):
            raise TruncatedStreamError("stream ended before EOI")
        if data[pos] != 0xFF:
            raise CorruptStreamError(f"expected marker at offset {pos}")
        marker = data[pos + 1]
        if marker == 0xFF:
            pos += 1
            continue
        if marker == EOI:
            break
        if pos + 4 > len(data):
            raise TruncatedStreamError("truncated marker segment")
        (length,) = struct.unpack(">H", data[pos + 2:pos + 4])
        payload = data[pos + 4:pos + 2 + length]
        if len(payload) != length - 2:
            raise TruncatedStreamError("truncated marker segment")
        pos += 2 + length
        if marker == DQT:
            _parse_dqt(payload, qtables)
        elif marker == DHT:
            _parse_dht(payload, dc_tables, ac_tables)
        elif marker == DRI:
            (restart,) = struct.unpack(">H", payload[:2])
        elif marker in (SOF0, SOF1):
            frame = _parse_sof(payload)
        elif 0xC2 <= marker <= 0xCF and marker not in (DHT, 0xC8, 0xCC):
            raise UnsupportedStreamError(f"SOF marker 0x{marker:02X} is not baseline sequential")
        elif marker == SOS:
            if frame is None:
                raise CorruptStreamError("SOS before SOF")
            chunks, pos = _scan_data(data, pos)
            _decode_scan(payload, chunks, frame, dc_tables, ac_tables, restart, grids)
        # APPn, COM and other segments are skipped.
    if frame is None:
        raise CorruptStreamError("no frame header")
    width, height, comp_specs = frame
    hb, wb = (height + 7) // 8, (width + 7) // 8
    comps = []
    for cid, tq in comp_specs:
        if cid not in grids:
            raise CorruptStreamError(f"component {cid} never appeared in a scan")
        if tq not in qtables:
            raise CorruptStreamError(f"quantization table {tq} undefined")
        comps.append(CoefficientTensor(grids[cid].reshape(hb, wb, 64), qtables[tq], cid))
    return JpegCoefficients(width, height, comps, dict(qtables))


def _parse_sof(payload: bytes):
    precision, height, width, n = struct.unpack(">BHHB", payload[:6])
    if precision != 8:
        raise UnsupportedStreamError(f"{precision}-bit samples are not supported")
    if height == 0:
        raise UnsupportedStreamError("DNL-defined height is not supported")
    if n not in (1, 3):
        raise UnsupportedStreamError(f"{n}-component images are not supported")
    specs = []
    for k in range(n):
        cid, hv, tq = payload[6 + 3 * k:9 + 3 * k]
        if n > 1 and hv != 0x11:
            raise UnsupportedStreamError("chroma subsampling is not supported (4:4:4 only)")
        specs.append((cid, tq))
    return width, height, specs


def _decode_scan(header, chunks, frame, dc_tables, ac_tables, restart, grids):
    width, height, specs = frame
    ns = header[0]
    ids = [cid for cid, _ in specs]
    pairs, order = [], []
    for k in range(ns):
        cid, tables = header[1 + 2 * k], header[2 + 2 * k]
        if cid not in ids:
            raise CorruptStreamError(f"scan references unknown component {cid}")
        td, ta = tables >> 4, tables & 15
        if td not in dc_tables or ta not in ac_tables:
            raise CorruptStreamError("scan references an undefined Huffman table")
        pairs.append((dc_tables[td], ac_tables[ta]))
        order.append(cid)
    ss, se, ahal = header[1 + 2 * ns:4 + 2 * ns]
    if (ss, se, ahal) != (0, 63, 0):
        raise UnsupportedStreamError("scan is not a full sequential scan")
    n_blocks = ((height + 7) // 8) * ((width + 7) // 8)
    decoded = entropy_decode(chunks, pairs, n_blocks, restart)
    for cid, arr in zip(order, decoded):
        grids[cid] = arr


# -- full decode -------------------------------------------------------------

def coefficients_to_pixels(coeffs: JpegCoefficients) -> PixelImage:
    planes = []
    for c in coeffs.components:
        deq = c.blocks.astype(np.int64) * c.table.natural.astype(np.int64)
        planes.append(merge_blocks(idct_8x8_int(deq), c.blocks_high, c.blocks_wide))
    stack = np.stack(planes, axis=-1)[: coeffs.height, : coeffs.width]
    if stack.shape[-1] == 3:
        return PixelImage(_ycbcr_planes_to_rgb(stack))
    return PixelImage(stack)


def decode_image(stream: bytes) -> PixelImage:
    """partial_decode, then dequantize, inverse DCT, level-unshift, clamp, color convert."""
    return coefficients_to_pixels(partial_decode(stream))


def compression_ratio(raw_bytes: int, stream_bytes: int) -> float:
    if stream_bytes <= 0:
        raise ValueError("compressed size must be positive")
    if raw_bytes <= 0:
        raise ValueError("raw size must be positive")
    return raw_bytes / stream_bytes
