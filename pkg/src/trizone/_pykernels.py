"""Pure numpy implementations of the hot kernels.

Bitsets are little-endian ``uint64`` word arrays: flat pixel ``i`` lives in
word ``i >> 6`` at bit ``i & 63``. Bits past the pixel count are always zero.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def n_words(nbits: int) -> int:
    return (nbits + 63) >> 6


def pack(bits: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(bits, dtype=np.uint8).reshape(-1)
    buf = np.zeros(n_words(flat.size) * 8, dtype=np.uint8)
    packed = np.packbits(flat != 0, bitorder="little")
    buf[: packed.size] = packed
    return buf.view("<u8").astype(np.uint64)


def unpack(words: np.ndarray, nbits: int) -> np.ndarray:
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, count=nbits, bitorder="little")


def pack_equal(labels: np.ndarray, value: int) -> np.ndarray:
    return pack(np.asarray(labels).reshape(-1) == value)


def pack_not_equal(labels: np.ndarray, value: int) -> np.ndarray:
    return pack(np.asarray(labels).reshape(-1) != value)


def bit_and(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.bitwise_and(a, b)


def bit_or(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.bitwise_or(a, b)


def bit_andnot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.bitwise_and(a, np.invert(b))


def bit_not(a: np.ndarray, nbits: int) -> np.ndarray:
    out = np.invert(a)
    tail = nbits & 63
    if tail and out.size:
        out[-1] &= np.uint64((1 << tail) - 1)
    return out


def popcount(a: np.ndarray) -> int:
    return int(np.bitwise_count(a).sum(dtype=np.int64))


def stretch_columns(gen: np.ndarray, part: np.ndarray) -> np.ndarray:
    """Fill each column of ``gen`` from its top set row down to the lowest
    ``part`` row. Columns without gen or part pixels are unchanged."""
    gen = np.asarray(gen, dtype=np.uint8) != 0
    part = np.asarray(part, dtype=np.uint8) != 0
    height = gen.shape[0]
    rows = np.arange(height)[:, None]
    top = np.argmax(gen, axis=0)
    lowest_part = height - 1 - np.argmax(part[::-1], axis=0)
    active = gen.any(axis=0) & part.any(axis=0)
    fill = (rows >= top) & (rows <= lowest_part) & active
    return (gen | fill).astype(np.uint8)


def _window_sums(a: np.ndarray, win: int) -> np.ndarray:
    integral = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.float64)
    integral[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    return (
        integral[win:, win:]
        - integral[:-win, win:]
        - integral[win:, :-win]
        + integral[:-win, :-win]
    )


def ssim_mean(x: np.ndarray, y: np.ndarray, win: int, c1: float, c2: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    area = float(win * win)
    mx = _window_sums(x, win) / area
    my = _window_sums(y, win) / area
    sxx = _window_sums(x * x, win) / area - mx * mx
    syy = _window_sums(y * y, win) / area - my * my
    sxy = _window_sums(x * y, win) / area - mx * my
    num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))
