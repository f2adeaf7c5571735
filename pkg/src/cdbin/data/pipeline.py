"""Document ingestion: padding, 256x256 tiling, ground-truth pairing, tile compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..codec import PixelImage, encode_image

TILE = 256
BORDER = 128


@dataclass(frozen=True)
class Padding:
    """Border on all four sides plus extra right/bottom fill up to a tile multiple."""

    border: int
    extra_bottom: int
    extra_right: int
    original_height: int
    original_width: int

    @property
    def padded_height(self) -> int:
        return self.original_height + 2 * self.border + self.extra_bottom

    @property
    def padded_width(self) -> int:
        return self.original_width + 2 * self.border + self.extra_right


def _round_up(n: int, m: int) -> int:
    return -(-n // m) * m


def pad_image(img, pad: int = BORDER, tile: int = TILE, fill: int = 0) -> tuple[np.ndarray, Padding]:
    """Add a ``pad``-wide black border, then pad right/bottom to multiples of ``tile``."""
    if pad < 0:
        raise ValueError("padding must be non-negative")
    arr = img.gray() if isinstance(img, PixelImage) else np.asarray(img)
    if arr.ndim != 2:
        raise ValueError("pad_image expects a 2-D grayscale array")
    h, w = arr.shape
    hp, wp = _round_up(h + 2 * pad, tile), _round_up(w + 2 * pad, tile)
    info = Padding(pad, hp - (h + 2 * pad), wp - (w + 2 * pad), h, w)
    out = np.full((hp, wp), fill, dtype=arr.dtype)
    out[pad:pad + h, pad:pad + w] = arr
    return out, info


def unpad_image(arr: np.ndarray, info: Padding) -> np.ndarray:
    b = info.border
    return arr[b:b + info.original_height, b:b + info.original_width]


def tile_image(arr: np.ndarray, tile: int = TILE) -> list[tuple[int, int, np.ndarray]]:
    """Row-major non-overlapping tiles as (row, col, tile) triples."""
    arr = np.asarray(arr)
    h, w = arr.shape[:2]
    if h % tile or w % tile:
        raise ValueError(f"image {w}x{h} is not a multiple of the {tile}px tile size")
    return [
        (r, c, arr[r * tile:(r + 1) * tile, c * tile:(c + 1) * tile])
        for r in range(h // tile)
        for c in range(w // tile)
    ]


class MissingTileError(KeyError):
    pass


def reassemble(tiles, rows: int, cols: int, tile: int = TILE) -> np.ndarray:
    """Stitch (row, col, tile) triples back into a rows x cols grid image."""
    got = {(r, c): t for r, c, t in tiles}
    missing = [(r, c) for r in range(rows) for c in range(cols) if (r, c) not in got]
    if missing:
        raise MissingTileError(f"missing tiles {missing[:4]}{'...' if len(missing) > 4 else ''}")
    first = next(iter(got.values()))
    out = np.empty((rows * tile, cols * tile) + first.shape[2:], dtype=first.dtype)
    for (r, c), t in got.items():
        out[r * tile:(r + 1) * tile, c * tile:(c + 1) * tile] = t
    return out


def binarize_ground_truth(gt: np.ndarray, threshold: int = 127) -> np.ndarray:
    gt = np.asarray(gt)
    return np.where(gt > threshold, 255, 0).astype(np.uint8)


@dataclass
class TilePair:
    doc_id: str
    row: int
    col: int
    stream: bytes
    ground_truth: np.ndarray  # (256, 256) uint8 in {0, 255}


def build_pairs(doc_id: str, doc, ground_truth, quality: int = 50,
                pad: int = BORDER, tile: int = TILE) -> tuple[list[TilePair], Padding]:
    """Pad and tile a document and its ground truth; JPEG-encode the document tiles.

    The ground truth is padded black like the document, so a black border
    maps to black output; the border is cropped before any scoring.
    """
    doc = np.asarray(doc)
    gt = np.asarray(ground_truth)
    if doc.shape != gt.shape:
        raise ValueError(f"document {doc.shape} and ground truth {gt.shape} differ in size")
    padded_doc, info = pad_image(doc, pad, tile)
    padded_gt, _ = pad_image(binarize_ground_truth(gt), pad, tile)
    pairs = []
    for (r, c, dt), (_, _, gtile) in zip(tile_image(padded_doc, tile), tile_image(padded_gt, tile)):
        stream = encode_image(PixelImage(dt), quality)
        pairs.append(TilePair(doc_id, r, c, stream, gtile.copy()))
    return pairs, info


# -- raster I/O ----------------------------------------------------------------

def read_gray(path) -> np.ndarray:
    """Read a raster (PGM/PPM required; anything Pillow opens accepted) as 8-bit gray."""
    with Image.open(path) as im:
        if im.mode not in ("L", "1"):
            im = im.convert("L")
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def write_pgm(path, arr: np.ndarray):
    """Binary (P5) portable graymap."""
    arr = np.asarray(arr, dtype=np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(arr.tobytes())
