"""Evaluation protocol: judged triptych accuracy and structural similarity.

A try-on result is judged by an image-understanding model shown the model
image, the garment and the result side by side. Accuracy is the fraction of
judged cases called reasonable; cases whose judgement failed are counted
separately and excluded from the denominator.
"""

from __future__ import annotations

import collections
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from PIL import Image

from . import kernels
from .backends import Backend
from .backends.base import Verdict
from .errors import BackendError, GridMismatch
from .maskcore import GarmentSpec, RgbImage

# Kept verbatim, including its mixed quote characters.
ACC_QWEN_PROMPT = (
    "I used the virtual try-on algorithm to replace the model‘s garment in the left-hand image "
    "with the garment in the middle. Then produced the output on the right. If the overall model "
    "image on the right is reasonable and matches the type and style of the middle-image clothing, "
    "it’s considered reasonable. If the output image is the same as the input model image or the "
    "garment of output is not consistent with the middle image, the output is unreasonable. You only "
    "need to judge if it's reasonable. Reply \"reasonable\" if it is, and \"unreasonable\" if not."
)

WHITE = (255, 255, 255)
SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = (0.299, 0.587, 0.114)


def acc_qwen_prompt() -> str:
    return ACC_QWEN_PROMPT


def _resize_to_height(image: RgbImage, height: int) -> RgbImage:
    if image.grid.height == height:
        return image
    width = max(1, round(image.grid.width * height / image.grid.height))
    resized = Image.fromarray(image.pixels).resize((width, height), Image.Resampling.BICUBIC)
    return RgbImage.from_array(np.asarray(resized))


def splice_triptych(model: RgbImage, garment: RgbImage, result: RgbImage, resize_height: int | None = None) -> RgbImage:
    """``model | garment | result`` side by side, shorter panels padded white at the bottom.

    Panels are not rescaled unless ``resize_height`` is given, in which case
    each is resized (aspect preserved) to that height first.
    """
    panels = [model, garment, result]
    if resize_height is not None:
        panels = [_resize_to_height(p, resize_height) for p in panels]
    height = max(p.grid.height for p in panels)
    width = sum(p.grid.width for p in panels)
    out = np.empty((height, width, 3), dtype=np.uint8)
    out[:] = WHITE
    x = 0
    for p in panels:
        out[: p.grid.height, x : x + p.grid.width] = p.pixels
        x += p.grid.width
    return RgbImage.from_array(out)


@dataclass(frozen=True)
class EvalCase:
    id: str
    model_image: RgbImage
    garment_image: RgbImage
    result_image: RgbImage
    category_pair: tuple[GarmentSpec, GarmentSpec]

    @property
    def category_key(self) -> str:
        a, b = self.category_pair
        return f"{a}->{b}"


@dataclass
class AccReport:
    total: int = 0
    reasonable: int = 0
    failures: int = 0
    per_category: dict[str, float | None] = field(default_factory=dict)
    failure_kinds: dict[str, int] = field(default_factory=dict)
    verdicts: dict[str, str] = field(default_factory=dict)  # case id -> verdict or failure kind

    @property
    def judged(self) -> int:
        return self.total - self.failures

    @property
    def acc(self) -> float | None:
        """Reasonable / judged; ``None`` when nothing was judged."""
        return self.reasonable / self.judged if self.judged else None

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "judged": self.judged,
            "reasonable": self.reasonable,
            "failures": self.failures,
            "acc": self.acc,
            "per_category": dict(sorted(self.per_category.items())),
            "failure_kinds": dict(sorted(self.failure_kinds.items())),
            "verdicts": self.verdicts,
        }

    def to_text(self) -> str:
        acc = "undefined" if self.acc is None else f"{self.acc:.4f}"
        lines = [
            f"cases      {self.total}",
            f"judged     {self.judged}",
            f"reasonable {self.reasonable}",
            f"failures   {self.failures}",
            f"acc        {acc}",
            "",
            f"{'category pair':<28} acc",
        ]
        for key, value in sorted(self.per_category.items()):
            lines.append(f"{key:<28} {'undefined' if value is None else f'{value:.4f}'}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        js, txt = out / "acc_report.json", out / "acc_report.txt"
        js.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        txt.write_text(self.to_text(), encoding="utf-8")
        return js, txt


def _judge_one(judge: Backend, case: EvalCase, prompt: str, resize_height: int | None) -> str:
    triptych = splice_triptych(case.model_image, case.garment_image, case.result_image, resize_height)
    try:
        return judge.judge(triptych, prompt, key=case.id).verdict.value
    except BackendError as exc:
        return f"!{exc.kind}"


def evaluate_acc(
    cases: Sequence[EvalCase],
    judge: Backend,
    workers: int = 4,
    prompt: str = ACC_QWEN_PROMPT,
    resize_height: int | None = None,
) -> AccReport:
    """Judge every case (concurrently) and tally in case order."""
    ids = [c.id for c in cases]
    if len(set(ids)) != len(ids):
        raise ValueError("evaluation case ids must be unique")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(pool.map(lambda c: _judge_one(judge, c, prompt, resize_height), cases))
    report = AccReport(total=len(cases))
    judged = collections.Counter()
    good = collections.Counter()
    kinds = collections.Counter()
    for case, outcome in zip(cases, outcomes):
        report.verdicts[case.id] = outcome
        if outcome.startswith("!"):
            kinds[outcome[1:]] += 1
            continue
        judged[case.category_key] += 1
        if outcome == Verdict.REASONABLE.value:
            good[case.category_key] += 1
    report.failures = sum(kinds.values())
    report.reasonable = sum(good.values())
    report.failure_kinds = dict(kinds)
    keys = {c.category_key for c in cases}
    report.per_category = {k: (good[k] / judged[k] if judged[k] else None) for k in sorted(keys)}
    return report


def luminance(image: RgbImage | np.ndarray) -> np.ndarray:
    px = image.pixels if isinstance(image, RgbImage) else np.asarray(image)
    if px.ndim == 2:
        return px.astype(np.float64)
    px = px.astype(np.float64)
    return LUMA[0] * px[..., 0] + LUMA[1] * px[..., 1] + LUMA[2] * px[..., 2]


def ssim(
    a: RgbImage | np.ndarray,
    b: RgbImage | np.ndarray,
    window: int = SSIM_WINDOW,
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
    data_range: float = 255.0,
) -> float:
    """Mean structural similarity over all ``window x window`` windows of the luminance.

    Uniform windows, population statistics; ``C1 = (k1 L)^2`` and ``C2 = (k2 L)^2``.
    """
    x, y = luminance(a), luminance(b)
    if x.shape != y.shape:
        raise GridMismatch(f"ssim inputs differ in size: {x.shape[::-1]} vs {y.shape[::-1]}")
    if window < 1 or window > min(x.shape):
        raise ValueError(f"window {window} does not fit a {x.shape[1]}x{x.shape[0]} image")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    return float(kernels.ssim_mean(x, y, window, c1, c2))


class FeatureMetricBackend(Protocol):
    """Interface for distribution metrics that need pretrained networks (FID, KID, LPIPS).

    No implementation is bundled.
    """

    name: str

    def score(self, results: Sequence[RgbImage], references: Sequence[RgbImage]) -> float: ...
