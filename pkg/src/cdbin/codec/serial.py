"""Zig-zag serialisation, DC prediction and AC run-length symbols."""

import numpy as np

from .tables import UNZIGZAG, ZIGZAG
from .types import CorruptStreamError

EOB = (0, 0)
ZRL = (15, 0)


def zigzag_scan(block) -> np.ndarray:
    """Flatten an 8x8 block (or a stack of them) into zig-zag order."""
    b = np.asarray(block)
    if b.shape[-2:] != (8, 8):
        raise ValueError(f"zigzag_scan expects 8x8 blocks, got shape {b.shape}")
    return b.reshape(b.shape[:-2] + (64,))[..., ZIGZAG]


def inverse_zigzag(seq) -> np.ndarray:
    s = np.asarray(seq)
    if s.shape[-1:] != (64,):
        raise ValueError(f"inverse_zigzag expects 64 entries, got shape {s.shape}")
    return s[..., UNZIGZAG].reshape(s.shape[:-1] + (8, 8))


def dpcm_dc(dcs) -> list[int]:
    dcs = [int(v) for v in dcs]
    if not dcs:
        raise ValueError("dpcm_dc needs at least one DC value")
    return [dcs[0]] + [b - a for a, b in zip(dcs, dcs[1:])]


def inverse_dpcm_dc(diffs) -> list[int]:
    out = []
    acc = 0
    for d in diffs:
        acc += int(d)
        out.append(acc)
    if not out:
        raise ValueError("inverse_dpcm_dc needs at least one difference")
    return out


def rle_ac(ac) -> list[tuple[int, int]]:
    """Run-length symbols (zero_run, value) for the 63 AC terms of a block.

    Runs longer than 15 are split with ZRL ``(15, 0)``; trailing zeros
    collapse into a single EOB ``(0, 0)``.
    """
    ac = [int(v) for v in ac]
    if len(ac) != 63:
        raise ValueError(f"rle_ac expects 63 AC coefficients, got {len(ac)}")
    symbols = []
    run = 0
    for v in ac:
        if v == 0:
            run += 1
            continue
        while run > 15:
            symbols.append(ZRL)
            run -= 16
        symbols.append((run, v))
        run = 0
    if run:
        symbols.append(EOB)
    return symbols


def inverse_rle_ac(symbols) -> list[int]:
    ac = []
    for run, value in symbols:
        if not 0 <= run <= 15:
            raise CorruptStreamError(f"zero run {run} outside [0, 15]")
        if (run, value) == EOB:
            break
        if (run, value) == ZRL:
            ac.extend([0] * 16)
        elif value == 0:
            raise CorruptStreamError(f"symbol ({run}, 0) is neither EOB nor ZRL")
        else:
            ac.extend([0] * run)
            ac.append(int(value))
        if len(ac) > 63:
            raise CorruptStreamError("run-length symbols overflow 63 AC coefficients")
    return ac + [0] * (63 - len(ac))
