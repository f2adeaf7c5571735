"""Pixel metrics, thresholding and tile reassembly."""

from __future__ import annotations

import math

import numpy as np

from ..data.pipeline import MissingTileError, reassemble

# PSNR of identical images; serialized as the string "inf".
PSNR_INF = math.inf


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(m: float) -> float:
    return PSNR_INF if m == 0 else 10.0 * math.log10(255.0**2 / m)


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit images; PSNR_INF when identical."""
    return psnr_from_mse(mse(a, b))


def pixel_accuracy(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(a == b))


def threshold_binarize(img, t: int = 127) -> np.ndarray:
    """255 where the value is strictly greater than ``t``, else 0."""
    return np.where(np.asarray(img) > t, 255, 0).astype(np.uint8)


def reassemble_tiles(tiles, record, tile: int = 256, border: int = 128) -> np.ndarray:
    """Stitch a document's (row, col, tile) triples and crop both paddings away.

    ``record`` is a DocumentRecord (or anything with padded/original sizes).
    Raises MissingTileError when the set is incomplete.
    """
    rows, cols = record.padded_height // tile, record.padded_width // tile
    full = reassemble(tiles, rows, cols, tile)
    return full[border:border + record.height, border:border + record.width]


__all__ = ["PSNR_INF", "MissingTileError", "mse", "pixel_accuracy", "psnr", "psnr_from_mse",
           "reassemble_tiles", "threshold_binarize"]
