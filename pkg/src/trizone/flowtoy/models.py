"""Toy networks with hand-written backward passes.

``ToyDenoiser`` predicts the noise of a noisy latent from the latent, the
timestep, per-token context and garment tokens (fused through
:func:`kv_concat_attention`). ``ZoneClassifier`` is the stage-1 per-pixel
tri-zone predictor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .attention import AttentionParams, attention_backward, attention_forward, softmax


def _dense(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    return rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, n_out))


@dataclass(frozen=True)
class DenoiserConfig:
    latent_dim: int
    context_dim: int
    garment_dim: int
    hidden: int = 32
    attn_dim: int = 16


class ToyDenoiser:
    """``eps_theta(z_t; cond, t)`` on token sequences.

    a    = tanh([z_t, ctx] W_in + b_in + t w_t)
    g    = tanh(garment W_g + b_g)
    h    = a + attention(a, g)
    pred = tanh(h W_1 + b_1) W_2 + b_2
    """

    def __init__(self, config: DenoiserConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        expected = self.param_shapes(config)
        if set(params) != set(expected) or any(params[k].shape != s for k, s in expected.items()):
            raise ShapeMismatch("parameter set does not match the denoiser config")

    @staticmethod
    def param_shapes(c: DenoiserConfig) -> dict[str, tuple[int, ...]]:
        h, a = c.hidden, c.attn_dim
        return {
            "w_in": (c.latent_dim + c.context_dim, h),
            "b_in": (h,),
            "w_t": (h,),
            "w_g": (c.garment_dim, h),
            "b_g": (h,),
            "attn.wq": (h, a),
            "attn.wk": (h, a),
            "attn.wv": (h, a),
            "attn.wk_g": (h, a),
            "attn.wv_g": (h, a),
            "attn.wo": (a, h),
            "w1": (h, h),
            "b1": (h,),
            "w2": (h, c.latent_dim),
            "b2": (c.latent_dim,),
        }

    @classmethod
    def init(cls, config: DenoiserConfig, rng: np.random.Generator) -> "ToyDenoiser":
        h = config.hidden
        params = {
            "w_in": _dense(rng, config.latent_dim + config.context_dim, h),
            "b_in": np.zeros(h),
            "w_t": rng.normal(0.0, 1.0, size=h),
            "w_g": _dense(rng, config.garment_dim, h),
            "b_g": np.zeros(h),
            "w1": _dense(rng, h, h),
            "b1": np.zeros(h),
            "w2": _dense(rng, h, config.latent_dim),
            "b2": np.zeros(config.latent_dim),
        }
        attn = AttentionParams.init(h, h, config.attn_dim, config.attn_dim, h, rng)
        params.update(attn.to_dict("attn."))
        return cls(config, params)

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def forward(self, z_t: np.ndarray, t: float, ctx: np.ndarray, garment: np.ndarray):
        p = self.params
        inp = np.concatenate([z_t, ctx], axis=1)
        a = np.tanh(inp @ p["w_in"] + p["b_in"] + t * p["w_t"])
        g = np.tanh(garment @ p["w_g"] + p["b_g"])
        attn_p = AttentionParams.from_dict(p, "attn.")
        o, attn_cache = attention_forward(a, g, attn_p)
        h = a + o
        u = np.tanh(h @ p["w1"] + p["b1"])
        pred = u @ p["w2"] + p["b2"]
        return pred, (inp, t, garment, a, g, attn_p, attn_cache, h, u)

    def backward(self, cache, dpred: np.ndarray) -> dict[str, np.ndarray]:
        inp, t, garment, a, g, attn_p, attn_cache, h, u = cache
        p = self.params
        grads = {"w2": u.T @ dpred, "b2": dpred.sum(axis=0)}
        d_u = dpred @ p["w2"].T
        d_pre1 = d_u * (1.0 - u * u)
        grads["w1"] = h.T @ d_pre1
        grads["b1"] = d_pre1.sum(axis=0)
        d_h = d_pre1 @ p["w1"].T
        d_a_attn, d_g, attn_grads = attention_backward(d_h, attn_cache, attn_p)
        grads.update({"attn." + k: v for k, v in attn_grads.items()})
        d_gpre = d_g * (1.0 - g * g)
        grads["w_g"] = garment.T @ d_gpre
        grads["b_g"] = d_gpre.sum(axis=0)
        d_apre = (d_h + d_a_attn) * (1.0 - a * a)
        grads["w_in"] = inp.T @ d_apre
        grads["b_in"] = d_apre.sum(axis=0)
        grads["w_t"] = t * d_apre.sum(axis=0)
        return grads

    def predict(self, z_t, t, ctx, garment) -> np.ndarray:
        return self.forward(z_t, t, ctx, garment)[0]


@dataclass(frozen=True)
class ClassifierConfig:
    features: int
    hidden: int = 32
    classes: int = 3


class ZoneClassifier:
    """Per-pixel MLP: features -> tanh hidden layer -> class logits."""

    def __init__(self, config: ClassifierConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        expected = self.param_shapes(config)
        if set(params) != set(expected) or any(params[k].shape != s for k, s in expected.items()):
            raise ShapeMismatch("parameter set does not match the classifier config")

    @staticmethod
    def param_shapes(c: ClassifierConfig) -> dict[str, tuple[int, ...]]:
        return {"w1": (c.features, c.hidden), "b1": (c.hidden,), "w2": (c.hidden, c.classes), "b2": (c.classes,)}

    @classmethod
    def init(cls, config: ClassifierConfig, rng: np.random.Generator) -> "ZoneClassifier":
        params = {
            "w1": _dense(rng, config.features, config.hidden),
            "b1": np.zeros(config.hidden),
            "w2": _dense(rng, config.hidden, config.classes),
            "b2": np.zeros(config.classes),
        }
        return cls(config, params)

    def logits(self, x: np.ndarray) -> np.ndarray:
        p = self.params
        return np.tanh(x @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1).astype(np.uint8)

    def loss_and_grads(self, x: np.ndarray, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        """Mean softmax cross-entropy and its gradients."""
        p = self.params
        n = x.shape[0]
        hid = np.tanh(x @ p["w1"] + p["b1"])
        z = hid @ p["w2"] + p["b2"]
        shifted = z - z.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -float(logp[np.arange(n), labels].mean())
        dz = softmax(z)
        dz[np.arange(n), labels] -= 1.0
        dz /= n
        d_pre = (dz @ p["w2"].T) * (1.0 - hid * hid)
        grads = {"w2": hid.T @ dz, "b2": dz.sum(axis=0), "w1": x.T @ d_pre, "b1": d_pre.sum(axis=0)}
        return loss, grads
