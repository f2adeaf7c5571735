"""Plain-text coefficient dump.

One block per line: ``component blockRow blockCol c0 ... c63`` with the 64
quantized coefficients in natural row-major order (not zig-zag). Lines that
start with ``#`` are comments; the writer emits a ``# width height`` header.
"""

import numpy as np

from .jfif import JpegCoefficients


def format_dump(coeffs: JpegCoefficients) -> str:
    lines = [f"# {coeffs.width} {coeffs.height}"]
    for c in coeffs.components:
        blocks = c.blocks.reshape(c.blocks_high, c.blocks_wide, 64)
        for r in range(c.blocks_high):
            for col in range(c.blocks_wide):
                vals = " ".join(str(int(v)) for v in blocks[r, col])
                lines.append(f"{c.component} {r} {col} {vals}")
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> dict[int, np.ndarray]:
    """Parse a dump into {component: (Hb, Wb, 8, 8) int array}."""
    rows: dict[int, dict[tuple[int, int], list[int]]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 67:
            raise ValueError(f"line {lineno}: expected 67 fields, got {len(parts)}")
        comp, r, c, *vals = (int(p) for p in parts)
        rows.setdefault(comp, {})[(r, c)] = vals
    out = {}
    for comp, blocks in rows.items():
        hb = 1 + max(r for r, _ in blocks)
        wb = 1 + max(c for _, c in blocks)
        if len(blocks) != hb * wb:
            raise ValueError(f"component {comp}: incomplete block grid")
        arr = np.zeros((hb, wb, 64), dtype=np.int32)
        for (r, c), vals in blocks.items():
            arr[r, c] = vals
        out[comp] = arr.reshape(hb, wb, 8, 8)
    return out
