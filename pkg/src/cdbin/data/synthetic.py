"""Synthetic degraded documents with exact ground truth, for tests and benchmarks."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw, ImageFilter, ImageFont

_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def _words(rng, n):
    return [
        "".join(rng.choice(list(_ALPHABET), size=int(rng.integers(2, 9))))
        for _ in range(n)
    ]


def synthetic_document(height: int, width: int, seed: int = 0, noise: float = 2.0,
                       font_size: int | None = None, blur: float = 1.2) -> tuple[np.ndarray, np.ndarray]:
    """Return (document, ground_truth) uint8 arrays of shape (height, width).

    Ground truth is 0 on ink and 255 on background. The document has a
    shaded paper background, a few soft stains, ink of varying darkness,
    an optical blur and Gaussian sensor noise. Glyph sizes (22-36 px) and
    the blur radius resemble text scanned at roughly 300 dpi.
    """
    rng = np.random.default_rng(seed)
    size = font_size or int(rng.integers(22, 37))
    font = ImageFont.load_default(size=size)
    mask = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(mask)
    line_h = int(size * rng.uniform(2.2, 3.0))
    margin = int(rng.integers(8, 24))
    y = margin + int(rng.integers(0, line_h))
    while y + size < height - margin:
        x = margin + int(rng.integers(0, 12))
        for word in _words(rng, 12):
            draw.text((x, y), word, fill=255, font=font)
            x += int(draw.textlength(word, font=font)) + int(rng.integers(size // 3, size))
            if x > width - margin:
                break
        y += line_h
    ink = np.asarray(mask) > 127

    yy, xx = np.mgrid[0:height, 0:width] / max(height, width)
    paper = 205 + 25 * (rng.random() * xx + rng.random() * yy) - 12.5
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.random(2) * [height, width]
        r = rng.uniform(0.1, 0.3) * max(height, width)
        d2 = ((np.arange(height)[:, None] - cy) ** 2 + (np.arange(width)[None, :] - cx) ** 2) / r**2
        paper -= rng.uniform(15, 35) * np.exp(-d2)
    darkness = rng.uniform(30, 70)
    doc = np.where(ink, darkness, paper)
    doc = np.asarray(Image.fromarray(np.clip(doc, 0, 255).astype(np.uint8)).filter(ImageFilter.GaussianBlur(blur)),
                     dtype=np.float64)
    doc += rng.normal(0.0, noise, doc.shape)
    gt = np.where(ink, 0, 255).astype(np.uint8)
    return np.clip(np.floor(doc + 0.5), 0, 255).astype(np.uint8), gt


def synthetic_corpus(n: int, height: int = 256, width: int = 256, seed: int = 0):
    """``n`` (document, ground_truth) pairs with independent seeds."""
    return [synthetic_document(height, width, seed=seed * 1000 + i) for i in range(n)]
