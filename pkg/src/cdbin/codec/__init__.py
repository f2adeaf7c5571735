"""Baseline JPEG codec with a partial decoder that stops at quantized DCT coefficients."""

from .dump import format_dump, parse_dump
from .huffman import HuffTable, default_tables, entropy_decode, entropy_encode
from .jfif import (
    JpegCoefficients,
    coefficients_to_pixels,
    compression_ratio,
    decode_image,
    encode_any_size,
    encode_coefficients,
    encode_image,
    partial_decode,
    quantized_coefficients,
)
from .serial import dpcm_dc, inverse_dpcm_dc, inverse_rle_ac, inverse_zigzag, rle_ac, zigzag_scan
from .transforms import (
    DCT_MATRIX,
    dequantize_block,
    fdct_8x8,
    idct_8x8,
    idct_8x8_int,
    merge_blocks,
    quantize_block,
    rgb_to_ycbcr,
    scale_quant_table,
    split_blocks,
    ycbcr_to_rgb,
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
