# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same signatures and bit layout as ``_pykernels``.

Packing and word-wise logic are already vectorized C inside numpy, so those are
re-exported from the fallback. Only loops numpy cannot express are compiled.
"""

import numpy as np

from ._pykernels import (  # noqa: F401
    bit_and,
    bit_andnot,
    bit_not,
    bit_or,
    n_words,
    pack,
    pack_equal,
    pack_not_equal,
    popcount,
    unpack,
)

cimport numpy as cnp
from libc.stdint cimport uint8_t

cnp.import_array()

NAME = "cython"


def stretch_columns(gen, part):
    cdef const uint8_t[:, ::1] g = np.ascontiguousarray(gen, dtype=np.uint8)
    cdef const uint8_t[:, ::1] p = np.ascontiguousarray(part, dtype=np.uint8)
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1], r, c, top, low
    out = (np.asarray(g) != 0).astype(np.uint8)
    cdef uint8_t[:, ::1] o = out
    with nogil:
        for c in range(w):
            top = -1
            for r in range(h):
                if g[r, c]:
                    top = r
                    break
            if top < 0:
                continue
            low = -1
            r = h - 1
            while r >= 0:
                if p[r, c]:
                    low = r
                    break
                r -= 1
            r = top
            while r <= low:
                o[r, c] = 1
                r += 1
    return out


cdef void _integral(const double[:, ::1] a, const double[:, ::1] b, double[:, ::1] s) noexcept nogil:
    # s[r+1, c+1] = sum of a*b over rows <= r, cols <= c; same cumsum order as the numpy path
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], r, c
    for c in range(w + 1):
        s[0, c] = 0.0
    for r in range(h + 1):
        s[r, 0] = 0.0
    for c in range(w):
        s[1, c + 1] = a[0, c] * b[0, c]
    for r in range(1, h):
        for c in range(w):
            s[r + 1, c + 1] = s[r, c + 1] + a[r, c] * b[r, c]
    for r in range(h):
        for c in range(1, w):
            s[r + 1, c + 1] = s[r + 1, c] + s[r + 1, c + 1]


cdef void _integral1(const double[:, ::1] a, double[:, ::1] s) noexcept nogil:
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], r, c
    for c in range(w + 1):
        s[0, c] = 0.0
    for r in range(h + 1):
        s[r, 0] = 0.0
    for c in range(w):
        s[1, c + 1] = a[0, c]
    for r in range(1, h):
        for c in range(w):
            s[r + 1, c + 1] = s[r, c + 1] + a[r, c]
    for r in range(h):
        for c in range(1, w):
            s[r + 1, c + 1] = s[r + 1, c] + s[r + 1, c + 1]


cdef inline double _box(const double[:, ::1] s, Py_ssize_t r, Py_ssize_t c, Py_ssize_t k) noexcept nogil:
    return s[r + k, c + k] - s[r, c + k] - s[r + k, c] + s[r, c]


def ssim_mean(x, y, int win, double c1, double c2):
    cdef const double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1], r, c
    cdef double[:, ::1] sx = np.empty((h + 1, w + 1))
    cdef double[:, ::1] sy = np.empty((h + 1, w + 1))
    cdef double[:, ::1] sxx = np.empty((h + 1, w + 1))
    cdef double[:, ::1] syy = np.empty((h + 1, w + 1))
    cdef double[:, ::1] sxy = np.empty((h + 1, w + 1))
    cdef double area = <double>win * win, mx, my, vx, vy, cxy, total = 0.0
    cdef Py_ssize_t count = (h - win + 1) * (w - win + 1)
    with nogil:
        _integral1(a, sx)
        _integral1(b, sy)
        _integral(a, a, sxx)
        _integral(b, b, syy)
        _integral(a, b, sxy)
        for r in range(h - win + 1):
            for c in range(w - win + 1):
                mx = _box(sx, r, c, win) / area
                my = _box(sy, r, c, win) / area
                vx = _box(sxx, r, c, win) / area - mx * mx
                vy = _box(syy, r, c, win) / area - my * my
                cxy = _box(sxy, r, c, win) / area - mx * my
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / (
                    (mx * mx + my * my + c1) * (vx + vy + c2))
    return total / count
