"""Attention with garment keys/values concatenated to the latent ones.

Queries come from the latent tokens only. Keys and values are the latent
tokens' projections stacked on top of the garment tokens' projections, so
every latent token attends over both sets in a single softmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ShapeMismatch
from .tensor import Tensor, as_array

ATTN_KEYS = ("wq", "wk", "wv", "wk_g", "wv_g", "wo")


@dataclass(frozen=True)
class AttentionParams:
    wq: np.ndarray  # (d, k)
    wk: np.ndarray  # (d, k)
    wv: np.ndarray  # (d, v)
    wk_g: np.ndarray  # (d_g, k)
    wv_g: np.ndarray  # (d_g, v)
    wo: np.ndarray  # (v, d_out)

    @classmethod
    def from_dict(cls, params: Mapping[str, np.ndarray], prefix: str = "") -> "AttentionParams":
        return cls(**{k: np.asarray(params[prefix + k], dtype=np.float64) for k in ATTN_KEYS})

    @classmethod
    def init(cls, d: int, d_g: int, k: int, v: int, d_out: int, rng: np.random.Generator) -> "AttentionParams":
        def w(n_in, n_out):
            return rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))

        return cls(w(d, k), w(d, k), w(d, v), w(d_g, k), w(d_g, v), w(v, d_out))

    def to_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + k: getattr(self, k) for k in ATTN_KEYS}


def softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class AttentionCache:
    x: np.ndarray
    y: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    weights: np.ndarray
    mixed: np.ndarray
    scale: float


def attention_forward(x: np.ndarray, y: np.ndarray, p: AttentionParams) -> tuple[np.ndarray, AttentionCache]:
    if x.ndim != 2 or x.shape[1] != p.wq.shape[0]:
        raise ShapeMismatch(f"latent tokens {x.shape} do not fit a ({p.wq.shape[0]},) projection")
    if y.ndim != 2 or y.shape[1] != p.wk_g.shape[0]:
        raise ShapeMismatch(f"garment tokens {y.shape} do not fit a ({p.wk_g.shape[0]},) projection")
    scale = 1.0 / np.sqrt(p.wq.shape[1])
    q = x @ p.wq
    k = np.concatenate([x @ p.wk, y @ p.wk_g], axis=0)
    v = np.concatenate([x @ p.wv, y @ p.wv_g], axis=0)
    weights = softmax((q @ k.T) * scale)
    mixed = weights @ v
    return mixed @ p.wo, AttentionCache(x, y, q, k, v, weights, mixed, scale)


def attention_backward(dout: np.ndarray, c: AttentionCache, p: AttentionParams):
    """Gradients ``(dx, dy, dparams)`` for upstream gradient ``dout``."""
    n = c.x.shape[0]
    d_wo = c.mixed.T @ dout
    d_mixed = dout @ p.wo.T
    d_w = d_mixed @ c.v.T
    d_v = c.weights.T @ d_mixed
    d_s = c.weights * (d_w - (d_w * c.weights).sum(axis=1, keepdims=True))
    d_q = d_s @ c.k * c.scale
    d_k = d_s.T @ c.q * c.scale
    d_kx, d_ky = d_k[:n], d_k[n:]
    d_vx, d_vy = d_v[:n], d_v[n:]
    grads = {
        "wq": c.x.T @ d_q,
        "wk": c.x.T @ d_kx,
        "wv": c.x.T @ d_vx,
        "wk_g": c.y.T @ d_ky,
        "wv_g": c.y.T @ d_vy,
        "wo": d_wo,
    }
    dx = d_q @ p.wq.T + d_kx @ p.wk.T + d_vx @ p.wv.T
    dy = d_ky @ p.wk_g.T + d_vy @ p.wv_g.T
    return dx, dy, grads


def kv_concat_attention(latent_tokens, garment_tokens, params: AttentionParams, return_weights: bool = False):
    """One output vector per latent token; ``garment_tokens`` may have zero rows."""
    x = as_array(latent_tokens)
    y = as_array(garment_tokens)
    if y.ndim == 1 and y.size == 0:
        y = y.reshape(0, params.wk_g.shape[0])
    out, cache = attention_forward(x, y, params)
    result = Tensor.of(out)
    return (result, cache.weights) if return_weights else result
