"""Desk-scale two-stage training on toy quadruplets.

Stage 1 learns to predict the tri-zone mask from the input image and the
garment (per-pixel 3-class classification, argmax = zone). Stage 2 learns a
noise predictor for the target image given the input image, the garment and
the stage-1 mask, trained with :func:`flow_loss`. Both use plain SGD with
momentum and are fully deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .. import config as cfgmod
from .. import pipeline
from ..errors import DivergenceError, EmptyDataset, ShapeMismatch
from ..maskcore import ImageGrid
from .flow import FlowSample, flow_loss
from .models import ClassifierConfig, DenoiserConfig, ToyDenoiser, ZoneClassifier
from .tensor import save_params

STAGE1_FEATURES = 9


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    stage1_steps: int = 300
    stage2_steps: int = 300
    stage1_lr: float = 0.5
    stage2_lr: float = 2e-4
    momentum: float = 0.9
    stage1_batch_pixels: int = 1024
    stage2_batch: int = 8
    stage2_eval_batch: int = 16
    hidden: int = 32
    attn_dim: int = 16
    patch: int = 4
    heldout_fraction: float = 0.1
    # Values of the full-scale recipe; recorded for reference, not used by the toy.
    reference_batch_size: int = 32
    reference_optimizer: str = "AdamW"
    reference_learning_rate: float = 3e-5

    def __post_init__(self) -> None:
        if self.stage1_steps < 0 or self.stage2_steps < 0:
            raise ValueError("step counts must be >= 0")
        if not 0.0 < self.heldout_fraction < 1.0:
            raise ValueError("heldout_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ToySample:
    id: str
    p_c: np.ndarray  # (H, W, 3) uint8
    p_g: np.ndarray
    g_g: np.ndarray
    zones: np.ndarray  # (H, W) uint8


def samples_from_quadruplets(quads: Iterable) -> list[ToySample]:
    """Convert ``(record, p_c, p_g, g_g, m3g)`` tuples into arrays."""
    out = []
    for rec, p_c, p_g, g_g, m3g in quads:
        out.append(ToySample(rec.id, p_c.pixels, p_g.pixels, g_g.pixels, m3g.zones))
    return out


def stage1_features(p_c: np.ndarray, g_g: np.ndarray) -> np.ndarray:
    """Per-pixel features: input RGB, garment RGB, garment-present flag, row, column."""
    h, w, _ = p_c.shape
    rows, cols = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")
    present = np.any(g_g != g_g[0, 0], axis=-1).astype(np.float64)
    feats = np.concatenate(
        [
            p_c.astype(np.float64) / 127.5 - 1.0,
            g_g.astype(np.float64) / 127.5 - 1.0,
            present[..., None],
            rows[..., None],
            cols[..., None],
        ],
        axis=-1,
    )
    return feats.reshape(h * w, STAGE1_FEATURES)


def patchify(a: np.ndarray, patch: int) -> np.ndarray:
    """(H, W, C) -> (H/p * W/p, p*p*C) row-major patch tokens."""
    h, w, c = a.shape
    if h % patch or w % patch:
        raise ShapeMismatch(f"grid {w}x{h} is not divisible by patch size {patch}")
    t = a.reshape(h // patch, patch, w // patch, patch, c).transpose(0, 2, 1, 3, 4)
    return t.reshape((h // patch) * (w // patch), patch * patch * c)


def _image_tokens(pixels: np.ndarray, patch: int) -> np.ndarray:
    return patchify(pixels.astype(np.float64) / 127.5 - 1.0, patch)


def _zone_tokens(zones: np.ndarray, patch: int) -> np.ndarray:
    return patchify(np.eye(3)[zones], patch)


@dataclass
class TrainReport:
    seed: int
    n_train: int
    n_heldout: int
    stage1_loss: list[float] = field(default_factory=list)
    stage2_loss: list[float] = field(default_factory=list)
    stage1_accuracy: float | None = None
    majority_baseline: float | None = None
    chance_baseline: float = 1.0 / 3.0
    stage1_params: int = 0
    stage2_params: int = 0
    config: dict = field(default_factory=dict)

    @property
    def stage1_reduction(self) -> float | None:
        if len(self.stage1_loss) < 2 or self.stage1_loss[0] == 0:
            return None
        return 1.0 - self.stage1_loss[-1] / self.stage1_loss[0]

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("stage1_loss")
        out.pop("stage2_loss")
        out.update(
            stage1_initial_loss=self.stage1_loss[0] if self.stage1_loss else None,
            stage1_final_loss=self.stage1_loss[-1] if self.stage1_loss else None,
            stage1_reduction=self.stage1_reduction,
            stage2_initial_loss=self.stage2_loss[0] if self.stage2_loss else None,
            stage2_final_loss=self.stage2_loss[-1] if self.stage2_loss else None,
        )
        return out

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        curve = out / "loss_curve.csv"
        with open(curve, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["stage", "step", "loss"])
            for stage, losses in ((1, self.stage1_loss), (2, self.stage2_loss)):
                for step, loss in enumerate(losses):
                    writer.writerow([stage, step, repr(loss)])
        summary = out / "summary.json"
        summary.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return curve, summary


class _Momentum:
    def __init__(self, params: dict[str, np.ndarray], lr: float, momentum: float):
        self.params, self.lr, self.mu = params, lr, momentum
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for k, g in grads.items():
            v = self.velocity[k]
            v *= self.mu
            v += g
            self.params[k] -= self.lr * v


def _check_finite(loss: float, stage: int, step: int, previous: Sequence[float], lr: float) -> None:
    if not math.isfinite(loss):
        last = next((x for x in reversed(previous) if math.isfinite(x)), None)
        raise DivergenceError(
            f"stage {stage} loss became {loss} at step {step} (last finite loss {last}, learning rate {lr}); "
            "lower the learning rate"
        )


def split_heldout(samples: Sequence[ToySample], fraction: float, rng: np.random.Generator):
    order = rng.permutation(len(samples))
    n_held = max(1, int(round(fraction * len(samples)))) if len(samples) > 1 else 0
    held = [samples[i] for i in sorted(order[:n_held])]
    train = [samples[i] for i in sorted(order[n_held:])]
    return train, held


def train_stage1(train: Sequence[ToySample], config: TrainConfig, rng: np.random.Generator):
    x = np.concatenate([stage1_features(s.p_c, s.g_g) for s in train])
    y = np.concatenate([s.zones.reshape(-1) for s in train]).astype(np.intp)
    model = ZoneClassifier.init(ClassifierConfig(STAGE1_FEATURES, config.hidden), rng)
    opt = _Momentum(model.params, config.stage1_lr, config.momentum)
    losses = [model.loss_and_grads(x, y)[0]]
    _check_finite(losses[0], 1, 0, losses, config.stage1_lr)
    for step in range(1, config.stage1_steps + 1):
        idx = rng.integers(0, len(y), size=min(config.stage1_batch_pixels, len(y)))
        _, grads = model.loss_and_grads(x[idx], y[idx])
        opt.step(grads)
        loss = model.loss_and_grads(x, y)[0]
        _check_finite(loss, 1, step, losses, config.stage1_lr)
        losses.append(loss)
    return model, losses


def _stage2_inputs(samples: Sequence[ToySample], classifier: ZoneClassifier, patch: int):
    z0s, conds, garments = [], [], []
    for s in samples:
        h, w = s.zones.shape
        zones = classifier.predict(stage1_features(s.p_c, s.g_g)).reshape(h, w)
        z0s.append(_image_tokens(s.p_g, patch))
        conds.append(np.concatenate([_image_tokens(s.p_c, patch), _zone_tokens(zones, patch)], axis=1))
        garments.append(_image_tokens(s.g_g, patch))
    return z0s, conds, garments


def train_stage2(train: Sequence[ToySample], classifier: ZoneClassifier, config: TrainConfig, rng: np.random.Generator):
    z0s, conds, garments = _stage2_inputs(train, classifier, config.patch)
    dcfg = DenoiserConfig(z0s[0].shape[1], conds[0].shape[1], garments[0].shape[1], config.hidden, config.attn_dim)
    model = ToyDenoiser.init(dcfg, rng)
    opt = _Momentum(model.params, config.stage2_lr, config.momentum)
    # Fixed evaluation batch so the curve is comparable across steps.
    n_eval = min(config.stage2_eval_batch, len(z0s))
    eval_batch = [
        FlowSample(z0s[i], rng.standard_normal(z0s[i].shape), float(rng.uniform()), conds[i], garments[i])
        for i in range(n_eval)
    ]
    losses = [flow_loss(model, eval_batch)[0]]
    _check_finite(losses[0], 2, 0, losses, config.stage2_lr)
    for step in range(1, config.stage2_steps + 1):
        idx = rng.integers(0, len(z0s), size=config.stage2_batch)
        batch = [
            FlowSample(z0s[i], rng.standard_normal(z0s[i].shape), float(rng.uniform()), conds[i], garments[i])
            for i in idx
        ]
        loss, grads = flow_loss(model, batch)
        _check_finite(loss, 2, step, losses, config.stage2_lr)
        opt.step(grads)
        eval_loss = flow_loss(model, eval_batch)[0]
        _check_finite(eval_loss, 2, step, losses, config.stage2_lr)
        losses.append(eval_loss)
    return model, losses


def train_toy_two_stage(
    samples: Sequence[ToySample], config: TrainConfig = TrainConfig(), out_dir: str | Path | None = None
) -> tuple[TrainReport, ZoneClassifier, ToyDenoiser]:
    """Train both stages; with ``out_dir`` also write the report and parameter files."""
    if not samples:
        raise EmptyDataset("no usable quadruplets (status Ok) in the dataset")
    shapes = {s.p_c.shape for s in samples}
    if len(shapes) != 1:
        raise ShapeMismatch(f"toy samples must share one grid, got {sorted(shapes)}")
    rng = np.random.default_rng(config.seed)
    train, held = split_heldout(samples, config.heldout_fraction, rng)
    classifier, losses1 = train_stage1(train, config, rng)
    report = TrainReport(config.seed, len(train), len(held), stage1_loss=losses1, config=asdict(config))
    if held:
        truth = np.concatenate([s.zones.reshape(-1) for s in held])
        pred = np.concatenate([classifier.predict(stage1_features(s.p_c, s.g_g)) for s in held])
        report.stage1_accuracy = float(np.mean(pred == truth))
        train_truth = np.concatenate([s.zones.reshape(-1) for s in train])
        majority = int(np.argmax(np.bincount(train_truth, minlength=3)))
        report.majority_baseline = float(np.mean(truth == majority))
    denoiser, losses2 = train_stage2(train, classifier, config, rng)
    report.stage2_loss = losses2
    report.stage1_params = sum(v.size for v in classifier.params.values())
    report.stage2_params = denoiser.n_params
    if out_dir is not None:
        report.write(out_dir)
        save_params(Path(out_dir) / "stage1.params", classifier.params)
        save_params(Path(out_dir) / "stage2.params", denoiser.params)
    return report, classifier, denoiser


def build_toy_dataset(work_dir: str | Path, n: int = 200, seed: int = 0, size: int = 16) -> list[ToySample]:
    """Construct ``n`` procedural quadruplets with the mock backends and load the usable ones."""
    cfg = cfgmod.mock_config(seed)
    entries = pipeline.procedural_corpus(n, ImageGrid(size, size), seed)
    pipeline.run(pipeline.build_plan(entries), cfgmod.build_capabilities(cfg), cfg, work_dir)
    quads = []
    for r in (1, 2):
        quads.extend(pipeline.iter_quadruplets(pipeline.manifest_path(work_dir, r)))
    quads.sort(key=lambda q: q[0].id)
    return samples_from_quadruplets(quads)
