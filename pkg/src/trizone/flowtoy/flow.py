"""Flow-matching objective: noisy latents on the straight path from data to noise."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_array


def constant_weight(t: float) -> float:
    return 1.0


@dataclass(frozen=True)
class FlowSample:
    """``z0`` clean latent tokens, ``eps`` a standard normal draw, ``t`` in [0, 1].

    ``cond`` holds per-token context aligned with ``z0``; ``garment`` the
    garment tokens fused through attention (may have zero rows).
    """

    z0: np.ndarray
    eps: np.ndarray
    t: float
    cond: np.ndarray
    garment: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self) -> None:
        for name in ("z0", "eps", "cond", "garment"):
            object.__setattr__(self, name, as_array(getattr(self, name)))
        if self.z0.shape != self.eps.shape:
            raise ShapeMismatch(f"z0 {self.z0.shape} and eps {self.eps.shape} differ")
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")


def interpolate(z0, eps, t: float):
    """``(1 - t) * z0 + t * eps``; returns the input type (Tensor or array)."""
    a, b = as_array(z0), as_array(eps)
    if a.shape != b.shape:
        raise ShapeMismatch(f"z0 {a.shape} and eps {b.shape} differ")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        out = a.copy()
    elif t == 1.0:
        out = b.copy()
    else:
        out = (1.0 - t) * a + t * b
    return Tensor.of(out) if isinstance(z0, Tensor) else out


class Denoiser(Protocol):
    params: dict[str, np.ndarray]

    def forward(self, z_t, t, ctx, garment): ...

    def backward(self, cache, dpred) -> dict[str, np.ndarray]: ...


def flow_loss(
    model: Denoiser,
    batch: Sequence[FlowSample],
    w: Callable[[float], float] = constant_weight,
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch mean of ``w(t) * ||eps_theta(z_t; cond, t) - eps||^2`` and its gradients.

    Gradients are accumulated over the batch in order, so results are bit-stable.
    """
    if not batch:
        raise ValueError("flow_loss needs a non-empty batch")
    n = len(batch)
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    for s in batch:
        weight = float(w(s.t))
        z_t = interpolate(s.z0, s.eps, s.t)
        pred, cache = model.forward(z_t, s.t, s.cond, s.garment)
        if pred.shape != s.eps.shape:
            raise ShapeMismatch(f"prediction {pred.shape} does not match eps {s.eps.shape}")
        diff = pred - s.eps
        total += weight * float(np.sum(diff * diff))
        if weight != 0.0 and grads:
            for k, g in model.backward(cache, (2.0 * weight / n) * diff).items():
                grads[k] += g
    return total / n, grads


class OracleDenoiser:
    """Test stub that returns the true noise for every sample of a known batch."""

    def __init__(self, batch: Sequence[FlowSample]):
        self.params: dict[str, np.ndarray] = {}
        self._eps = {self._key(interpolate(s.z0, s.eps, s.t), s.t): s.eps for s in batch}

    @staticmethod
    def _key(z_t: np.ndarray, t: float) -> bytes:
        return z_t.tobytes() + np.float64(t).tobytes()

    def forward(self, z_t, t, ctx, garment):
        return self._eps[self._key(z_t, t)].copy(), None

    def backward(self, cache, dpred) -> dict[str, np.ndarray]:
        return {}


def sample_batch(
    rng: np.random.Generator,
    z0s: Sequence[np.ndarray],
    conds: Sequence[np.ndarray],
    garments: Sequence[np.ndarray],
) -> list[FlowSample]:
    """Draw ``t ~ U[0, 1]`` and ``eps ~ N(0, I)`` for each clean latent."""
    out = []
    for z0, cond, garment in zip(z0s, conds, garments):
        t = float(rng.uniform(0.0, 1.0))
        eps = rng.standard_normal(z0.shape)
        out.append(FlowSample(z0, eps, t, cond, garment))
    return out
