from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tables import UNZIGZAG, ZIGZAG


class CodecError(Exception):
    """Base class for JPEG codec failures."""


class UnsupportedStreamError(CodecError):
    """The stream uses a JPEG feature outside baseline 4:4:4 Huffman coding."""


class CorruptStreamError(CodecError):
    """Malformed markers, invalid Huffman codes or out-of-range symbols."""


class TruncatedStreamError(CorruptStreamError):
    pass


@dataclass(frozen=True, eq=False)
class PixelImage:
    """8-bit image stored as an (H, W, C) uint8 array, C in {1, 3}."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3 or s.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) samples, got shape {s.shape}")
        if s.dtype != np.uint8:
            if np.issubdtype(s.dtype, np.floating) and not np.all(np.isfinite(s)):
                raise ValueError("samples must be finite")
            if s.size and (s.min() < 0 or s.max() > 255):
                raise ValueError("samples must lie in [0, 255]")
            s = s.astype(np.uint8)
        object.__setattr__(self, "samples", s)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def components(self) -> int:
        return self.samples.shape[2]

    def gray(self) -> np.ndarray:
        """The single component as a 2-D array; only valid for grayscale images."""
        if self.components != 1:
            raise ValueError("image is not grayscale")
        return self.samples[:, :, 0]

    def __eq__(self, other):
        return isinstance(other, PixelImage) and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class QuantTable:
    """64 quantizer steps, stored in zig-zag order like a DQT segment."""

    entries: tuple[int, ...]
    quality: int | None = None
    kind: str | None = None  # "luminance", "chrominance", or None when parsed

    def __post_init__(self):
        if len(self.entries) != 64:
            raise ValueError("quantization table needs 64 entries")
        if min(self.entries) < 1 or max(self.entries) > 65535:
            raise ValueError("quantization entries must be in [1, 65535]")

    @property
    def natural(self) -> np.ndarray:
        """Steps as an 8x8 array in natural row-major order."""
        return np.asarray(self.entries, dtype=np.int64)[UNZIGZAG].reshape(8, 8)

    @classmethod
    def from_natural(cls, table, quality=None, kind=None) -> QuantTable:
        flat = np.asarray(table, dtype=np.int64).reshape(64)
        return cls(tuple(int(v) for v in flat[ZIGZAG]), quality, kind)


@dataclass(eq=False)
class CoefficientTensor:
    """Quantized DCT coefficients of one image component.

    ``grid`` has shape (blocks_high, blocks_wide, 64) with each block in
    zig-zag order, so entry 0 is the DC term. ``plane`` is the same data laid
    out as an (8*blocks_high, 8*blocks_wide) array of natural-order blocks.
    """

    grid: np.ndarray
    table: QuantTable
    component: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int32)
        if self.grid.ndim != 3 or self.grid.shape[2] != 64:
            raise ValueError(f"coefficient grid must be (Hb, Wb, 64), got {self.grid.shape}")

    @property
    def blocks_high(self) -> int:
        return self.grid.shape[0]

    @property
    def blocks_wide(self) -> int:
        return self.grid.shape[1]

    @property
    def blocks(self) -> np.ndarray:
        """(Hb, Wb, 8, 8) natural-order view."""
        hb, wb, _ = self.grid.shape
        return self.grid[:, :, UNZIGZAG].reshape(hb, wb, 8, 8)

    @property
    def plane(self) -> np.ndarray:
        hb, wb, _ = self.grid.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(hb * 8, wb * 8)

    @classmethod
    def from_plane(cls, plane, table, component=1) -> CoefficientTensor:
        plane = np.asarray(plane)
        h, w = plane.shape
        if h % 8 or w % 8:
            raise ValueError("coefficient plane dimensions must be multiples of 8")
        blocks = plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
        grid = blocks.reshape(h // 8, w // 8, 64)[:, :, ZIGZAG]
        return cls(grid, table, component)

    def dequantized(self) -> np.ndarray:
        """Grid multiplied by the quantizer steps, still zig-zag ordered."""
        steps = np.asarray(self.table.entries, dtype=np.float64)
        return self.grid * steps

    def __eq__(self, other):
        return (
            isinstance(other, CoefficientTensor)
            and self.component == other.component
            and self.table.entries == other.table.entries
            and np.array_equal(self.grid, other.grid)
        )
