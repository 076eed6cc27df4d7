import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trizone.errors import DivergenceError, EmptyDataset, FormatError, ShapeMismatch
from trizone.flowtoy import (
    AttentionParams,
    ClassifierConfig,
    DenoiserConfig,
    OracleDenoiser,
    Tensor,
    ToyDenoiser,
    ToySample,
    TrainConfig,
    ZoneClassifier,
    flow_loss,
    interpolate,
    kv_concat_attention,
    load_params,
    sample_batch,
    save_params,
    softmax,
    train_toy_two_stage,
)
from trizone.flowtoy.gradcheck import max_relative_error, numeric_grads, relative_error
from trizone.flowtoy.train import patchify, stage1_features, train_stage2

SMALL = DenoiserConfig(latent_dim=4, context_dim=3, garment_dim=5, hidden=6, attn_dim=3)


def small_batch(rng, n=2, tokens=3, garment_tokens=2):
    z0s = [rng.normal(size=(tokens, SMALL.latent_dim)) for _ in range(n)]
    conds = [rng.normal(size=(tokens, SMALL.context_dim)) for _ in range(n)]
    garments = [rng.normal(size=(garment_tokens, SMALL.garment_dim)) for _ in range(n)]
    return sample_batch(rng, z0s, conds, garments)


def test_interpolate_endpoints_exact(rng):
    z0, eps = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
    assert np.array_equal(interpolate(z0, eps, 0.0), z0)
    assert np.array_equal(interpolate(z0, eps, 1.0), eps)
    assert np.allclose(interpolate(z0, eps, 0.25), 0.75 * z0 + 0.25 * eps)
    out = interpolate(Tensor.of(z0), Tensor.of(eps), 1.0)
    assert isinstance(out, Tensor) and np.array_equal(out.array, eps)
    with pytest.raises(ValueError):
        interpolate(z0, eps, 1.5)
    with pytest.raises(ShapeMismatch):
        interpolate(z0, eps[:2], 0.5)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_flow_loss_gradcheck(seed):
    rng = np.random.default_rng(seed)
    model = ToyDenoiser.init(SMALL, rng)
    batch = small_batch(rng)
    _, analytic = flow_loss(model, batch, w=lambda t: 0.5 + t)
    numeric = numeric_grads(lambda: flow_loss(model, batch, w=lambda t: 0.5 + t)[0], model.params)
    errors = max_relative_error(analytic, numeric)
    assert set(errors) == set(model.params)
    assert max(errors.values()) < 1e-4, errors


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_classifier_gradcheck(seed):
    rng = np.random.default_rng(seed)
    model = ZoneClassifier.init(ClassifierConfig(features=5, hidden=7), rng)
    x = rng.normal(size=(20, 5))
    y = rng.integers(0, 3, size=20)
    _, analytic = model.loss_and_grads(x, y)
    numeric = numeric_grads(lambda: model.loss_and_grads(x, y)[0], model.params)
    assert max(max_relative_error(analytic, numeric).values()) < 1e-4


def test_relative_error_floor():
    assert relative_error(0.0, 1e-9) == pytest.approx(1e-3)
    assert relative_error(2.0, 1.0) == 0.5


def test_oracle_loss_is_zero(rng):
    batch = small_batch(rng, n=4)
    loss, grads = flow_loss(OracleDenoiser(batch), batch)
    assert loss == 0.0 and grads == {}


def test_zero_weight_gives_zero_loss_and_grads(rng):
    model = ToyDenoiser.init(SMALL, rng)
    batch = small_batch(rng)
    loss, grads = flow_loss(model, batch, w=lambda t: 0.0)
    assert loss == 0.0
    assert all(not g.any() for g in grads.values())


def test_flow_loss_value_by_hand(rng):
    model = ToyDenoiser.init(SMALL, rng)
    batch = small_batch(rng, n=3)
    expected = np.mean([np.sum((model.predict(interpolate(s.z0, s.eps, s.t), s.t, s.cond, s.garment) - s.eps) ** 2) for s in batch])
    assert flow_loss(model, batch)[0] == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        flow_loss(model, [])


def unit_params(wq, wk, wv, wk_g, wv_g, wo):
    a = lambda v: np.array([[v]], dtype=np.float64)  # noqa: E731
    return AttentionParams(a(wq), a(wk), a(wv), a(wk_g), a(wv_g), a(wo))


def test_attention_one_latent_one_garment_by_hand():
    # x = 1, y = 2; q = 1, keys (0.5, 2), values (3, -2), scale 1.
    params = unit_params(wq=1.0, wk=0.5, wv=3.0, wk_g=1.0, wv_g=-1.0, wo=2.0)
    out, weights = kv_concat_attention([[1.0]], [[2.0]], params, return_weights=True)
    w_garment = 1.0 / (1.0 + math.exp(-1.5))
    expected = 2.0 * ((1.0 - w_garment) * 3.0 + w_garment * -2.0)
    assert abs(out.array[0, 0] - expected) < 1e-10
    assert abs(out.array[0, 0] - (-2.1757447619364365)) < 1e-10
    assert np.allclose(weights, [[1.0 - w_garment, w_garment]], atol=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(0, 4))
def test_attention_weights_sum_to_one(seed, n, m):
    rng = np.random.default_rng(seed)
    params = AttentionParams.init(4, 3, 2, 5, 4, rng)
    out, weights = kv_concat_attention(rng.normal(size=(n, 4)), rng.normal(size=(m, 3)), params, return_weights=True)
    assert out.shape == (n, 4)
    assert weights.shape == (n, n + m)
    assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-12)


def test_empty_garment_equals_self_attention(rng):
    params = AttentionParams.init(4, 3, 2, 5, 4, rng)
    x = rng.normal(size=(3, 4))
    got = kv_concat_attention(x, np.zeros((0, 3)), params).array
    q, k, v = x @ params.wq, x @ params.wk, x @ params.wv
    want = softmax(q @ k.T / math.sqrt(2)) @ v @ params.wo
    assert np.allclose(got, want, atol=1e-12)
    assert np.allclose(kv_concat_attention(x, [], params).array, want, atol=1e-12)


def test_garment_token_order_does_not_matter(rng):
    params = AttentionParams.init(4, 3, 2, 5, 4, rng)
    x, y = rng.normal(size=(3, 4)), rng.normal(size=(6, 3))
    a = kv_concat_attention(x, y, params).array
    b = kv_concat_attention(x, y[rng.permutation(6)], params).array
    assert np.allclose(a, b, atol=1e-12)


def test_attention_shape_errors(rng):
    params = AttentionParams.init(4, 3, 2, 5, 4, rng)
    with pytest.raises(ShapeMismatch):
        kv_concat_attention(np.zeros((2, 5)), np.zeros((1, 3)), params)
    with pytest.raises(ShapeMismatch):
        kv_concat_attention(np.zeros((2, 4)), np.zeros((1, 4)), params)


def test_params_roundtrip_and_layout(tmp_path, rng):
    params = ToyDenoiser.init(SMALL, rng).params
    path = tmp_path / "p.params"
    save_params(path, params)
    back = load_params(path)
    assert set(back) == set(params)
    for k in params:
        assert np.array_equal(back[k], params[k])
    data = path.read_bytes()
    assert data[:8] == b"TZPARAM1"
    (hlen,) = struct.unpack("<I", data[8:12])
    assert len(data) == 12 + hlen + 8 * sum(v.size for v in params.values())


@pytest.mark.parametrize("mangle", [lambda d: b"NOTPARAM" + d[8:], lambda d: d[:-3], lambda d: d + b"\0"])
def test_params_corruption(tmp_path, rng, mangle):
    path = tmp_path / "p.params"
    save_params(path, {"w": rng.normal(size=(2, 2))})
    path.write_bytes(mangle(path.read_bytes()))
    with pytest.raises(FormatError):
        load_params(path)


def test_tensor_shape_check():
    with pytest.raises(ShapeMismatch):
        Tensor((2, 2), np.zeros(3))
    t = Tensor.of(np.arange(6.0).reshape(2, 3))
    assert t.shape == (2, 3) and t.array[1, 2] == 5.0


def test_patchify_roundtrip():
    a = np.arange(8 * 8 * 3).reshape(8, 8, 3)
    tokens = patchify(a, 4)
    assert tokens.shape == (4, 48)
    assert np.array_equal(tokens[1].reshape(4, 4, 3), a[:4, 4:8])
    with pytest.raises(ShapeMismatch):
        patchify(a[:7], 4)


def test_stage1_features_shape():
    p_c = np.zeros((4, 5, 3), np.uint8)
    g_g = np.full((4, 5, 3), 248, np.uint8)
    g_g[1, 1] = (10, 20, 30)
    f = stage1_features(p_c, g_g)
    assert f.shape == (20, 9)
    assert f[:, 6].sum() == 1.0


def toy_samples(n=12, size=8, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        zones = rng.integers(0, 3, size=(size, size)).astype(np.uint8)
        img = lambda: rng.integers(0, 256, size=(size, size, 3)).astype(np.uint8)  # noqa: E731
        out.append(ToySample(f"s{i}", img(), img(), img(), zones))
    return out


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(stage1_steps=5, stage2_steps=3)
    a, _, _ = train_toy_two_stage(toy_samples(), cfg, tmp_path / "a")
    b, _, _ = train_toy_two_stage(toy_samples(), cfg, tmp_path / "b")
    assert a.stage1_loss == b.stage1_loss and a.stage2_loss == b.stage2_loss
    assert (tmp_path / "a" / "stage2.params").read_bytes() == (tmp_path / "b" / "stage2.params").read_bytes()
    assert len(a.stage1_loss) == 6 and len(a.stage2_loss) == 4
    lines = (tmp_path / "a" / "loss_curve.csv").read_text().splitlines()
    assert lines[0] == "stage,step,loss" and len(lines) == 11


def test_training_errors():
    with pytest.raises(EmptyDataset):
        train_toy_two_stage([], TrainConfig())
    mixed = toy_samples(2, 8) + toy_samples(2, 4)
    with pytest.raises(ShapeMismatch):
        train_toy_two_stage(mixed, TrainConfig())


def test_divergence_is_reported():
    samples = toy_samples()
    _, classifier, _ = train_toy_two_stage(samples, TrainConfig(stage1_steps=1, stage2_steps=0))
    with np.errstate(all="ignore"), pytest.raises(DivergenceError, match="learning rate"):
        train_stage2(samples, classifier, TrainConfig(stage2_lr=1e6, stage2_steps=50), np.random.default_rng(0))
