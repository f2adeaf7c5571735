"""Compressed-domain inference: JFIF stream in, binary image out.

The input stream is only partially decoded. Padding is applied to the
coefficient grid directly: a black 8x8 block has dequantized DC -1024 and
no AC energy, which is exactly what the encoder produces for a black
border, so padded document tiles match the tiles the model was trained on.
"""

from __future__ import annotations

import numpy as np

from ..codec import PixelImage, partial_decode
from ..data.pipeline import BORDER, TILE
from .model import COEFF_SCALE, DdganModel, coefficients_to_input

THRESHOLD = 127


def _padded_grid(coeffs, pad_blocks: int, tile_blocks: int) -> np.ndarray:
    """(64, Hb, Wb) input grid padded with black blocks and rounded up to whole tiles."""
    grid = coefficients_to_input(coeffs)
    _, hb, wb = grid.shape
    hp = -(-(hb + 2 * pad_blocks) // tile_blocks) * tile_blocks
    wp = -(-(wb + 2 * pad_blocks) // tile_blocks) * tile_blocks
    out = np.zeros((64, hp, wp), dtype=grid.dtype)
    out[0] = -1024.0 / COEFF_SCALE
    out[:, pad_blocks:pad_blocks + hb, pad_blocks:pad_blocks + wb] = grid
    return out


def probability_map(stream: bytes, model: DdganModel, pad: int = BORDER, batch_size: int = 8) -> np.ndarray:
    """Generator probability map (values in (0, 1)) cropped to the stream's image size."""
    if pad % 8:
        raise ValueError("padding must be a multiple of the 8-pixel block size")
    if model.config.model.input_domain != "dct":
        raise ValueError("compressed-domain inference needs a model trained on coefficient input")
    tile = model.config.model.tile_size
    jc = partial_decode(stream)
    tb = tile // 8
    grid = _padded_grid(jc.components[0], pad // 8, tb)
    rows, cols = grid.shape[1] // tb, grid.shape[2] // tb
    tiles = np.stack([grid[:, r * tb:(r + 1) * tb, c * tb:(c + 1) * tb] for r in range(rows) for c in range(cols)])
    preds = np.concatenate([model.generate(tiles[i:i + batch_size]) for i in range(0, len(tiles), batch_size)])
    full = preds[:, 0].reshape(rows, cols, tile, tile).transpose(0, 2, 1, 3).reshape(rows * tile, cols * tile)
    return full[pad:pad + jc.height, pad:pad + jc.width]


def binarize(stream: bytes, model: DdganModel, pad: int = BORDER, threshold: int = THRESHOLD) -> PixelImage:
    """Binary {0, 255} image with the stream's original dimensions."""
    prob = probability_map(stream, model, pad)
    return PixelImage(np.where(prob * 255.0 > threshold, 255, 0).astype(np.uint8))


def binarize_tiles(streams, model: DdganModel, threshold: int = THRESHOLD, batch_size: int = 8) -> np.ndarray:
    """Per-tile binarization without padding: (N, tile, tile) uint8 in {0, 255}."""
    inputs = np.stack([coefficients_to_input(partial_decode(s).components[0]) for s in streams])
    probs = np.concatenate([model.generate(inputs[i:i + batch_size]) for i in range(0, len(inputs), batch_size)])
    return np.where(probs[:, 0] * 255.0 > threshold, 255, 0).astype(np.uint8)


__all__ = ["binarize", "binarize_tiles", "probability_map", "TILE"]
