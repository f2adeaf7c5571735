"""Codec unit tests: worked examples, brute-force oracles and round-trip properties."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdbin.codec import (
    DCT_MATRIX,
    CodecError,
    CoefficientTensor,
    CorruptStreamError,
    HuffTable,
    PixelImage,
    QuantTable,
    TruncatedStreamError,
    UnsupportedStreamError,
    compression_ratio,
    decode_image,
    default_tables,
    dequantize_block,
    dpcm_dc,
    encode_any_size,
    encode_image,
    entropy_decode,
    entropy_encode,
    fdct_8x8,
    format_dump,
    idct_8x8,
    idct_8x8_int,
    inverse_dpcm_dc,
    inverse_rle_ac,
    inverse_zigzag,
    merge_blocks,
    parse_dump,
    partial_decode,
    quantize_block,
    quantized_coefficients,
    rgb_to_ycbcr,
    rle_ac,
    scale_quant_table,
    split_blocks,
    ycbcr_to_rgb,
    zigzag_scan,
)
from cdbin.codec.tables import LUMINANCE_QT, ZIGZAG
from cdbin.data.synthetic import synthetic_document


def brute_force_dct(b):
    """Direct double-sum 2-D DCT-II with JPEG normalization."""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = 1 / math.sqrt(2) if u == 0 else 1.0
            cv = 1 / math.sqrt(2) if v == 0 else 1.0
            s = 0.0
            for x in range(8):
                for y in range(8):
                    s += b[x, y] * math.cos((2 * x + 1) * u * math.pi / 16) * math.cos((2 * y + 1) * v * math.pi / 16)
            out[u, v] = 0.25 * cu * cv * s
    return out


def psnr(a, b):
    m = np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2)
    return float("inf") if m == 0 else 10 * math.log10(255**2 / m)


# -- color ---------------------------------------------------------------------

@pytest.mark.parametrize("rgb, ycc", [((255, 255, 255), (255, 128, 128)), ((0, 0, 0), (0, 128, 128)),
                                      ((255, 0, 0), (76, 85, 255))])
def test_rgb_to_ycbcr_examples(rgb, ycc):
    img = PixelImage(np.array(rgb, dtype=np.uint8).reshape(1, 1, 3))
    assert tuple(rgb_to_ycbcr(img).samples[0, 0]) == ycc


def test_rgb_to_ycbcr_rejects_gray():
    with pytest.raises((ValueError, CodecError)):
        rgb_to_ycbcr(PixelImage(np.zeros((8, 8), np.uint8)))


def test_ycbcr_round_trip_within_one():
    rng = np.random.default_rng(0)
    img = PixelImage(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
    back = ycbcr_to_rgb(rgb_to_ycbcr(img)).samples.astype(int)
    # Saturated colors lose a little in the clamped YCbCr cube; typical pixels stay within 1.
    assert np.mean(np.abs(back - img.samples.astype(int)) <= 1) > 0.97


# -- blocks, DCT, quantization -------------------------------------------------------

def test_split_blocks_examples():
    assert split_blocks(np.zeros((256, 256), np.uint8)).shape[0] == 1024
    assert np.all(split_blocks(np.full((16, 16), 128, np.uint8)) == 0)
    assert np.all(split_blocks(np.full((8, 8), 255, np.uint8)) == 127)
    with pytest.raises(ValueError):
        split_blocks(np.zeros((12, 16), np.uint8))


def test_split_merge_round_trip():
    plane = np.random.default_rng(1).integers(0, 256, (24, 40)).astype(np.uint8)
    assert np.array_equal(merge_blocks(split_blocks(plane) + 128, 3, 5), plane)


def test_split_blocks_row_major():
    plane = np.zeros((16, 16), np.uint8)
    plane[0:8, 8:16] = 200
    blocks = split_blocks(plane)
    assert np.all(blocks[1] == 72) and np.all(blocks[0] == -128)


def test_fdct_examples():
    assert np.allclose(fdct_8x8(np.zeros((8, 8))), 0)
    c = fdct_8x8(np.full((8, 8), 127.0))
    assert c[0, 0] == pytest.approx(1016.0, abs=1e-9)
    assert np.max(np.abs(c.ravel()[1:])) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_fdct_matches_brute_force(seed):
    b = np.random.default_rng(seed).uniform(-128, 127, (8, 8))
    assert np.max(np.abs(fdct_8x8(b) - brute_force_dct(b))) < 1e-9


def test_idct_examples():
    assert np.allclose(idct_8x8(np.zeros((8, 8))), 0)
    c = np.zeros((8, 8))
    c[0, 0] = 1016
    assert np.allclose(idct_8x8(c), 127.0, atol=1e-9)


@pytest.mark.parametrize("u, v", [(0, 1), (3, 5), (7, 7)])
def test_idct_basis(u, v):
    c = np.zeros((8, 8))
    c[u, v] = 1.0
    cu = 1 / math.sqrt(2) if u == 0 else 1.0
    cv = 1 / math.sqrt(2) if v == 0 else 1.0
    x, y = np.mgrid[0:8, 0:8]
    expect = 0.25 * cu * cv * np.cos((2 * x + 1) * u * math.pi / 16) * np.cos((2 * y + 1) * v * math.pi / 16)
    assert np.allclose(idct_8x8(c), expect, atol=1e-12)


def test_integer_idct_examples():
    assert np.all(idct_8x8_int(np.zeros((8, 8), int)) == 128)
    c = np.zeros((8, 8), int)
    c[0, 0] = 1016
    assert np.all(idct_8x8_int(c) == 255)
    c[0, 0] = -1024
    assert np.all(idct_8x8_int(c) == 0)
    c[0, 0] = 12  # 12/8 = 1.5 rounds up
    assert np.all(idct_8x8_int(c) == 130)


def test_integer_idct_within_one_of_exact():
    rng = np.random.default_rng(11)
    deq = rng.integers(-300, 301, (2000, 8, 8)) * (rng.random((2000, 8, 8)) < 0.3)
    exact = np.clip(np.floor(idct_8x8(deq) + 128.5), 0, 255)
    assert np.abs(idct_8x8_int(deq).astype(int) - exact).max() <= 1


def test_dct_matrix_orthonormal():
    assert np.allclose(DCT_MATRIX @ DCT_MATRIX.T, np.eye(8), atol=1e-14)


def test_dct_round_trip_1000_blocks():
    b = np.random.default_rng(2).uniform(-128, 127, (1000, 8, 8))
    assert np.max(np.abs(idct_8x8(fdct_8x8(b)) - b)) < 1e-9


def test_scale_quant_table_examples():
    t50 = scale_quant_table("luminance", 50)
    assert np.array_equal(t50.natural, np.asarray(LUMINANCE_QT).reshape(8, 8))
    assert np.all(np.asarray(scale_quant_table("chrominance", 100).entries) == 1)
    assert scale_quant_table("luminance", 25).entries[0] == 32
    for q in (0, 101):
        with pytest.raises(ValueError):
            scale_quant_table("luminance", q)


@given(st.integers(1, 100), st.sampled_from(["luminance", "chrominance"]))
def test_quant_entries_in_range(q, kind):
    e = np.asarray(scale_quant_table(kind, q).entries)
    assert e.min() >= 1 and e.max() <= 255


def test_quantize_examples():
    t = scale_quant_table("luminance", 50)
    c = np.zeros((8, 8))
    c[0, 0] = 1016
    q = quantize_block(c, t)
    assert q[0, 0] == 64 and np.all(q.ravel()[1:] == 0)
    assert np.all(quantize_block(np.zeros((8, 8)), t) == 0)
    assert dequantize_block(q, t)[0, 0] == 1024
    c[0, 0] = -1016
    assert quantize_block(c, t)[0, 0] == -64  # half rounds away from zero


def test_quantize_dequantize_exact_on_multiples():
    t = scale_quant_table("luminance", 50)
    k = np.random.default_rng(3).integers(-20, 20, (8, 8))
    x = k * t.natural
    assert np.array_equal(dequantize_block(quantize_block(x, t), t), x)


@given(st.lists(st.integers(-500, 500), min_size=64, max_size=64), st.integers(1, 100))
def test_quantize_idempotent_on_dequantized(vals, quality):
    t = scale_quant_table("luminance", quality)
    c = np.asarray(vals).reshape(8, 8)
    assert np.array_equal(quantize_block(dequantize_block(c, t), t), c)


def test_quant_table_zigzag_views():
    t = scale_quant_table("luminance", 50)
    assert QuantTable.from_natural(t.natural, 50, "luminance") == t
    assert t.entries[0] == t.natural[0, 0] and t.entries[2] == t.natural[1, 0]


# -- serialization ---------------------------------------------------------------

def test_zigzag_examples():
    b = np.arange(64).reshape(8, 8)
    assert list(zigzag_scan(b)[:4]) == [0, 1, 8, 16]
    d = np.zeros((8, 8), int)
    d[0, 0] = 9
    assert list(zigzag_scan(d)) == [9] + [0] * 63
    with pytest.raises(ValueError):
        inverse_zigzag(list(range(63)))


def test_zigzag_table_is_a_permutation():
    assert sorted(ZIGZAG) == list(range(64))


@given(st.lists(st.integers(-1024, 1023), min_size=64, max_size=64))
def test_zigzag_round_trip(vals):
    b = np.asarray(vals).reshape(8, 8)
    assert np.array_equal(inverse_zigzag(zigzag_scan(b)), b)


def test_dpcm_examples():
    assert dpcm_dc([64, 66, 65]) == [64, 2, -1]
    assert dpcm_dc([5, 5, 5]) == [5, 0, 0]
    with pytest.raises(ValueError):
        dpcm_dc([])


@given(st.lists(st.integers(-2047, 2047), min_size=1, max_size=50))
def test_dpcm_round_trip(xs):
    assert inverse_dpcm_dc(dpcm_dc(xs)) == xs


def test_rle_examples():
    assert rle_ac([0] * 63) == [(0, 0)]
    assert rle_ac([0, 0, 0, 5] + [0] * 59) == [(3, 5), (0, 0)]
    assert rle_ac([0] * 20 + [7] + [0] * 42) == [(15, 0), (4, 7), (0, 0)]
    full = list(range(1, 64))
    assert rle_ac(full)[-1] != (0, 0)  # no EOB when the last coefficient is nonzero
    with pytest.raises(ValueError):
        rle_ac([0] * 62)


def test_rle_decode_rejects_long_runs():
    with pytest.raises(CorruptStreamError):
        inverse_rle_ac([(16, 3), (0, 0)])


@given(st.lists(st.integers(-1023, 1023).filter(bool) | st.just(0) | st.just(0), min_size=63, max_size=63))
def test_rle_round_trip(ac):
    assert inverse_rle_ac(rle_ac(ac)) == ac


# -- Huffman / entropy layer --------------------------------------------------------

def test_default_tables_canonical():
    for chroma in (False, True):
        for t in default_tables(chroma):
            codes = t.codes
            assert len(codes) == len(t.values)
            lengths = sorted((n, c) for c, n in codes.values())
            # canonical: codes of equal length are consecutive integers
            for (n1, c1), (n2, c2) in zip(lengths, lengths[1:]):
                if n1 == n2:
                    assert c2 == c1 + 1
            assert all(not (n == 16 and c == 0xFFFF) for c, n in codes.values())


def test_huff_table_validation():
    with pytest.raises(CodecError):
        HuffTable(0, 0, (3,) + (0,) * 15, bytes([0, 1, 2]))  # three 1-bit codes
    with pytest.raises(CodecError):
        # Lengths 1..15 once each plus two 16-bit codes: the last code is all ones.
        HuffTable(0, 0, (1,) * 15 + (2,), bytes(range(17)))


def test_entropy_rejects_empty():
    with pytest.raises(CodecError):
        entropy_encode([np.zeros((0, 64), int)], [default_tables()])


def test_entropy_single_zero_block():
    tables = [default_tables()]
    data = entropy_encode([np.zeros((1, 64), int)], tables)
    out = entropy_decode([data], tables, 1)
    assert np.array_equal(out[0], np.zeros((1, 64)))


def _random_tensor(rng, n):
    t = np.zeros((n, 64), int)
    dens = rng.uniform(0, 1)
    mask = rng.random((n, 64)) < dens
    t[mask] = rng.integers(-1023, 1024, mask.sum())
    t[:, 0] = rng.integers(-1023, 1024, n)
    return t


def test_entropy_round_trip_1000_random_tensors():
    rng = np.random.default_rng(4)
    luma, chroma = default_tables(False), default_tables(True)
    for i in range(1000):
        n = int(rng.integers(1, 6))
        comps = [_random_tensor(rng, n) for _ in range(3 if i % 4 == 0 else 1)]
        tables = [luma] + [chroma] * (len(comps) - 1)
        ri = int(rng.integers(1, 3)) if i % 7 == 0 else 0
        data = entropy_encode(comps, tables, ri)
        chunks = [data] if not ri else _split_rst(data)
        out = entropy_decode(chunks, tables, n, ri)
        for a, b in zip(comps, out):
            assert np.array_equal(a, b)


def _split_rst(data: bytes):
    chunks, cur, i = [], bytearray(), 0
    while i < len(data):
        if data[i] == 0xFF and i + 1 < len(data) and 0xD0 <= data[i + 1] <= 0xD7:
            chunks.append(bytes(cur))
            cur = bytearray()
            i += 2
            continue
        cur.append(data[i])
        i += 1
    chunks.append(bytes(cur))
    return chunks


def test_entropy_byte_stuffing():
    rng = np.random.default_rng(5)
    data = entropy_encode([_random_tensor(rng, 50)], [default_tables()])
    for i, byte in enumerate(data[:-1]):
        if byte == 0xFF:
            assert data[i + 1] == 0x00


def test_entropy_truncated_stream():
    rng = np.random.default_rng(6)
    t = _random_tensor(rng, 40)
    data = entropy_encode([t], [default_tables()])
    with pytest.raises(CorruptStreamError):
        entropy_decode([data[: len(data) // 3]], [default_tables()], 40)
    with pytest.raises(TruncatedStreamError):
        entropy_decode([data], [default_tables()], 41)


# -- full pipeline -------------------------------------------------------------------

@pytest.mark.parametrize("quality", [75, 90, 100])
def test_gray_constant_round_trip_exact(quality):
    # The DC step divides 8 at these qualities, so a constant level survives exactly.
    for v in (0, 77, 128, 200, 255):
        img = PixelImage(np.full((16, 24), v, np.uint8))
        assert np.array_equal(decode_image(encode_image(img, quality)).samples, img.samples)


def test_gray_constant_round_trip_q50():
    # DC step 16: even offsets from 128 are exact, odd ones land on a tie and
    # round away from zero, one level further from mid-grey.
    for v in range(0, 256, 7):
        img = PixelImage(np.full((8, 8), v, np.uint8))
        out = int(decode_image(encode_image(img, 50)).gray()[0, 0])
        if (v - 128) % 2 == 0:
            assert out == v
        else:
            assert out == min(255, max(0, v + (1 if v > 128 else -1)))


def test_all_128_gives_zero_coefficients():
    s = encode_image(PixelImage(np.full((256, 256), 128, np.uint8)), 50)
    jc = partial_decode(s)
    assert not jc.components[0].grid.any()


def test_stream_structure():
    s = encode_image(PixelImage(np.full((16, 16), 10, np.uint8)))
    assert s[:2] == b"\xff\xd8" and s[-2:] == b"\xff\xd9"
    for marker in (b"\xff\xe0", b"\xff\xdb", b"\xff\xc0", b"\xff\xc4", b"\xff\xda"):
        assert marker in s


@pytest.mark.parametrize("quality", [10, 50, 90])
def test_pipeline_coherence(quality):
    doc, _ = synthetic_document(64, 96, seed=quality)
    img = PixelImage(doc)
    expect = quantized_coefficients(img, quality)
    got = partial_decode(encode_image(img, quality))
    assert got.width == 96 and got.height == 64
    assert got.components[0] == expect.components[0]
    assert np.array_equal(got.components[0].table.entries, expect.components[0].table.entries)


def test_pipeline_coherence_color():
    rng = np.random.default_rng(7)
    img = PixelImage(rng.integers(0, 256, (32, 40, 3), dtype=np.uint8))
    expect = quantized_coefficients(img, 75)
    got = partial_decode(encode_image(img, 75, restart_interval=3))
    assert [c.component for c in got.components] == [1, 2, 3]
    for a, b in zip(expect.components, got.components):
        assert a == b


def test_decode_quality_monotone():
    doc, _ = synthetic_document(256, 256, seed=11)
    img = PixelImage(doc)
    lo = psnr(decode_image(encode_image(img, 10)).gray(), doc)
    hi = psnr(decode_image(encode_image(img, 90)).gray(), doc)
    assert hi > lo


def test_tile_round_trip_psnr_above_30():
    doc, _ = synthetic_document(256, 256, seed=12)
    assert psnr(decode_image(encode_image(PixelImage(doc), 50)).gray(), doc) > 30


def test_encode_rejects_non_multiple_of_eight():
    with pytest.raises(ValueError):
        encode_image(PixelImage(np.zeros((10, 16), np.uint8)))


def test_encode_any_size_crops_on_decode():
    rng = np.random.default_rng(8)
    img = PixelImage(rng.integers(0, 256, (13, 21), dtype=np.uint8))
    s = encode_any_size(img, 95)
    out = decode_image(s)
    assert (out.height, out.width) == (13, 21)
    jc = partial_decode(s)
    assert jc.components[0].grid.shape[:2] == (2, 3)


def test_partial_decode_errors():
    good = encode_image(PixelImage(np.full((16, 16), 90, np.uint8)))
    with pytest.raises(CodecError):
        partial_decode(b"not a jpeg")
    with pytest.raises(CodecError):
        partial_decode(good[: len(good) // 2])
    progressive = good.replace(b"\xff\xc0", b"\xff\xc2", 1)
    with pytest.raises(UnsupportedStreamError):
        partial_decode(progressive)


def test_coefficient_tensor_views():
    rng = np.random.default_rng(9)
    grid = rng.integers(-50, 50, (3, 4, 64)).astype(np.int32)
    t = CoefficientTensor(grid, scale_quant_table("luminance", 50), component=1)
    assert t.blocks.shape == (3, 4, 8, 8) and t.plane.shape == (24, 32)
    assert t.blocks[1, 2][0, 0] == grid[1, 2, 0]
    assert CoefficientTensor.from_plane(t.plane, t.table, 1) == t
    assert np.array_equal(t.plane[8:16, 16:24], t.blocks[1, 2])


def test_dump_round_trip():
    doc, _ = synthetic_document(32, 48, seed=3)
    jc = partial_decode(encode_image(PixelImage(doc), 50))
    text = format_dump(jc)
    assert text.startswith("# 48 32\n")
    parsed = parse_dump(text)
    assert np.array_equal(parsed[1], jc.components[0].blocks)
    first = text.splitlines()[1].split()
    assert first[:3] == ["1", "0", "0"] and len(first) == 67


def test_compression_ratio_examples():
    assert compression_ratio(3072, 48) == 64
    assert compression_ratio(100, 100) == 1
    with pytest.raises(ValueError):
        compression_ratio(100, 0)


def test_energy_compaction():
    nz_low = nz = 0
    for seed in range(6):
        doc, _ = synthetic_document(256, 256, seed=seed)
        g = partial_decode(encode_image(PixelImage(doc), 50)).components[0].grid
        nz += np.count_nonzero(g)
        nz_low += np.count_nonzero(g[:, :, :16])
    assert nz_low / nz >= 0.9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 100))
def test_random_image_pipeline_coherence(seed, quality):
    rng = np.random.default_rng(seed)
    h, w = 8 * rng.integers(1, 5, 2)
    img = PixelImage(rng.integers(0, 256, (h, w), dtype=np.uint8))
    decoded = partial_decode(encode_image(img, quality)).components[0]
    assert decoded == quantized_coefficients(img, quality).components[0]
