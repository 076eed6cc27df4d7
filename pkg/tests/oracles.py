"""Independent reference implementations used by the tests.

Everything here works pixel by pixel on plain Python lists so it shares no
code path with the packed-bitset library it checks.
"""

from __future__ import annotations

import math


def to_lists(a):
    return [[bool(v) for v in row] for row in a.tolist()]


def imagi_round1(gen, fg, tryon):
    h, w = len(gen), len(gen[0])
    return [[(gen[y][x] and fg[y][x]) and not tryon[y][x] for x in range(w)] for y in range(h)]


def imagi_round2(tryon_p, imagi_p, fg, tryon_g, union_first=True):
    h, w = len(fg), len(fg[0])
    out = []
    for y in range(h):
        row = []
        for x in range(w):
            if union_first:
                generated = (tryon_p[y][x] or imagi_p[y][x]) and fg[y][x]
            else:
                generated = tryon_p[y][x] or (imagi_p[y][x] and fg[y][x])
            row.append(generated and not tryon_g[y][x])
        out.append(row)
    return out


def zone_codes(tryon, imagi):
    """2 for try-on, 1 for imagination, 0 otherwise."""
    return [[2 if t else (1 if i else 0) for t, i in zip(tr, ir)] for tr, ir in zip(tryon, imagi)]


def stretch(gen, part):
    """Column-wise stretch: from the top gen row down to the lowest part row."""
    h, w = len(gen), len(gen[0])
    out = [row[:] for row in gen]
    for x in range(w):
        gen_rows = [y for y in range(h) if gen[y][x]]
        part_rows = [y for y in range(h) if part[y][x]]
        if not gen_rows or not part_rows:
            continue
        for y in range(gen_rows[0], part_rows[-1] + 1):
            out[y][x] = True
    return out


def shrink(gen, shift):
    """Clear the bottom ``shift`` rows of the bounding box of ``gen``."""
    rows = [y for y, row in enumerate(gen) if any(row)]
    bottom = rows[-1]
    out = [row[:] for row in gen]
    for y in range(bottom - shift + 1, bottom + 1):
        out[y] = [False] * len(gen[0])
    return out


def ssim_reference(x, y, window=7, k1=0.01, k2=0.03, data_range=255.0):
    """Mean SSIM with an explicit loop over every window position."""
    h, w = len(x), len(x[0])
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    n = window * window
    total, count = 0.0, 0
    for top in range(h - window + 1):
        for left in range(w - window + 1):
            xs = [x[top + i][left + j] for i in range(window) for j in range(window)]
            ys = [y[top + i][left + j] for i in range(window) for j in range(window)]
            mx = math.fsum(xs) / n
            my = math.fsum(ys) / n
            vx = math.fsum((a - mx) ** 2 for a in xs) / n
            vy = math.fsum((b - my) ** 2 for b in ys) / n
            cov = math.fsum((a - mx) * (b - my) for a, b in zip(xs, ys)) / n
            total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
            count += 1
    return total / count


def luma(rgb_rows):
    return [[0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2] for p in row] for row in rgb_rows]
