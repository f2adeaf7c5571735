"""Pixel-side stages of the codec: color conversion, block splitting, DCT, quantization."""

import numpy as np

from .tables import CHROMINANCE_QT, LUMINANCE_QT
from .types import PixelImage, QuantTable


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def rgb_to_ycbcr(img: PixelImage) -> PixelImage:
    if img.components != 3:
        raise ValueError("rgb_to_ycbcr needs a 3-component image")
    rgb = img.samples.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    out = np.stack([y, cb, cr], axis=-1)
    return PixelImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))


def ycbcr_to_rgb(img: PixelImage) -> PixelImage:
    if img.components != 3:
        raise ValueError("ycbcr_to_rgb needs a 3-component image")
    return PixelImage(_ycbcr_planes_to_rgb(img.samples.astype(np.float64)))


def _fix16(v: float) -> int:
    return int(v * 65536 + 0.5)


def _ycbcr_planes_to_rgb(ycc):
    """Integer YCbCr planes -> RGB, each chroma term rounded in 16-bit fixed point.

    This is the rounding order of the common reference decoder, so decoded
    colour images agree with it sample for sample.
    """
    y, cb, cr = (np.asarray(ycc[..., i], dtype=np.int64) for i in range(3))
    cb, cr = cb - 128, cr - 128
    half = 1 << 15
    r = y + ((_fix16(1.402) * cr + half) >> 16)
    g = y + ((-_fix16(0.34414) * cb - _fix16(0.71414) * cr + half) >> 16)
    b = y + ((_fix16(1.772) * cb + half) >> 16)
    return np.clip(np.stack([r, g, b], axis=-1), 0, 255).astype(np.uint8)


def split_blocks(plane) -> np.ndarray:
    """Cut a 2-D plane into row-major 8x8 blocks, level-shifted by -128.

    Returns an (n_blocks, 8, 8) float64 array.
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ValueError("split_blocks expects a 2-D plane")
    h, w = plane.shape
    if h % 8 or w % 8:
        raise ValueError(f"plane {w}x{h} is not a multiple of 8; pad it first")
    blocks = plane.astype(np.float64).reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    return blocks.reshape(-1, 8, 8) - 128.0


def merge_blocks(blocks, blocks_high, blocks_wide) -> np.ndarray:
    """Inverse of :func:`split_blocks` without the level shift."""
    b = np.asarray(blocks).reshape(blocks_high, blocks_wide, 8, 8)
    return b.transpose(0, 2, 1, 3).reshape(blocks_high * 8, blocks_wide * 8)


def _dct_matrix():
    k = np.arange(8)
    m = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16) / 2.0
    m[0, :] /= np.sqrt(2.0)
    return m


# DCT_MATRIX[u, x] = C(u)/2 * cos((2x+1) u pi / 16); orthonormal.
DCT_MATRIX = _dct_matrix()


def fdct_8x8(block) -> np.ndarray:
    """Separable 2-D DCT-II over the last two axes (any leading batch shape)."""
    b = np.asarray(block, dtype=np.float64)
    return DCT_MATRIX @ b @ DCT_MATRIX.T


def idct_8x8(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    return DCT_MATRIX.T @ c @ DCT_MATRIX


# Fixed-point constants (13 fractional bits) of the accurate integer IDCT.
_C = {name: int(v * 8192 + 0.5) for name, v in {
    "0_298631336": 0.298631336, "0_390180644": 0.390180644, "0_541196100": 0.541196100,
    "0_765366865": 0.765366865, "0_899976223": 0.899976223, "1_175875602": 1.175875602,
    "1_501321110": 1.501321110, "1_847759065": 1.847759065, "1_961570560": 1.961570560,
    "2_053119869": 2.053119869, "2_562915447": 2.562915447, "3_072711026": 3.072711026}.items()}
_CONST_BITS, _PASS1_BITS = 13, 2


def _idct_1d_int(v, shift):
    """One separable pass of the integer IDCT along the last axis of ``v``."""
    def descale(x):
        return (x + (1 << (shift - 1))) >> shift

    z2, z3 = v[..., 2], v[..., 6]
    z1 = (z2 + z3) * _C["0_541196100"]
    tmp2 = z1 - z3 * _C["1_847759065"]
    tmp3 = z1 + z2 * _C["0_765366865"]
    tmp0 = (v[..., 0] + v[..., 4]) << _CONST_BITS
    tmp1 = (v[..., 0] - v[..., 4]) << _CONST_BITS
    tmp10, tmp13, tmp11, tmp12 = tmp0 + tmp3, tmp0 - tmp3, tmp1 + tmp2, tmp1 - tmp2

    t0, t1, t2, t3 = v[..., 7], v[..., 5], v[..., 3], v[..., 1]
    z1, z2, z3, z4 = t0 + t3, t1 + t2, t0 + t2, t1 + t3
    z5 = (z3 + z4) * _C["1_175875602"]
    t0 = t0 * _C["0_298631336"]
    t1 = t1 * _C["2_053119869"]
    t2 = t2 * _C["3_072711026"]
    t3 = t3 * _C["1_501321110"]
    z1 = -z1 * _C["0_899976223"]
    z2 = -z2 * _C["2_562915447"]
    z3 = -z3 * _C["1_961570560"] + z5
    z4 = -z4 * _C["0_390180644"] + z5
    t0, t1, t2, t3 = t0 + z1 + z3, t1 + z2 + z4, t2 + z2 + z3, t3 + z1 + z4

    out = [tmp10 + t3, tmp11 + t2, tmp12 + t1, tmp13 + t0,
           tmp13 - t0, tmp12 - t1, tmp11 - t2, tmp10 - t3]
    return np.stack([descale(o) for o in out], axis=-1)


def idct_8x8_int(dequantized) -> np.ndarray:
    """Accurate integer IDCT of (..., 8, 8) dequantized blocks to level-shifted 8-bit samples.

    Separable fixed-point algorithm with 13-bit constants and two extra bits
    between passes, the default of widely deployed decoders; it agrees with
    :func:`idct_8x8` to within one level and makes decoded samples
    bit-identical to theirs. Returns uint8 samples (level shift and clamp applied).
    """
    c = np.asarray(dequantized, dtype=np.int64)
    cols = _idct_1d_int(np.swapaxes(c, -1, -2), _CONST_BITS - _PASS1_BITS)
    rows = _idct_1d_int(np.swapaxes(cols, -1, -2), _CONST_BITS + _PASS1_BITS + 3)
    return np.clip(rows + 128, 0, 255).astype(np.uint8)


def scale_quant_table(kind: str, quality: int = 50) -> QuantTable:
    """IJG quality scaling of the standard luminance/chrominance tables."""
    if not 1 <= int(quality) <= 100 or int(quality) != quality:
        raise ValueError(f"quality must be an integer in [1, 100], got {quality}")
    quality = int(quality)
    if kind == "luminance":
        base = LUMINANCE_QT
    elif kind == "chrominance":
        base = CHROMINANCE_QT
    else:
        raise ValueError(f"unknown table kind {kind!r}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    table = np.clip((base * scale + 50) // 100, 1, 255)
    return QuantTable.from_natural(table, quality, kind)


def quantize_block(coeffs, table: QuantTable) -> np.ndarray:
    """Divide natural-order coefficients by the table, rounding half away from zero.

    Quotients are first snapped to 1e-6 so exact ties (common: a constant
    block's DC is a multiple of 8) are not decided by floating-point noise
    in the transform.
    """
    q = _round_half_away(np.round(np.asarray(coeffs, dtype=np.float64) / table.natural, 6))
    return q.astype(np.int32)


def dequantize_block(qcoeffs, table: QuantTable) -> np.ndarray:
    return np.asarray(qcoeffs, dtype=np.int64) * table.natural
