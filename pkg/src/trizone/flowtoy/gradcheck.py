"""Central finite-difference checks for hand-written gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-6
DEFAULT_FLOOR = 1e-6


def relative_error(analytic: float, numeric: float, floor: float = DEFAULT_FLOOR) -> float:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero gradients from dividing by ~0."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def numeric_grads(
    loss: Callable[[], float], params: dict[str, np.ndarray], step: float = DEFAULT_STEP
) -> dict[str, np.ndarray]:
    """Perturb every parameter entry in place (restoring it) and difference ``loss``."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            flat[i] = orig - step
            down = loss()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        out[name] = g
    return out


def max_relative_error(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray], floor: float = DEFAULT_FLOOR
) -> dict[str, float]:
    """Worst entry-wise relative error per parameter."""
    out = {}
    for name, a in analytic.items():
        n = numeric[name]
        err = np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        out[name] = float(err.max()) if err.size else 0.0
    return out
