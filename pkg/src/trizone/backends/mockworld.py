"""Procedural people, garments and deterministic mock models.

Rendered images carry their own annotations in the low bits of each pixel:
``blue & 7`` is the human-parsing label and ``green & 7`` the DensePose part
(both 0 for background). The mock models read and write those bits, so a
mock parse of a rendered person returns exactly the generator's labels and
every mock output is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BackendTimeout
from ..maskcore import (
    BinaryMask,
    Category,
    GarmentSpec,
    ImageGrid,
    LabelMap,
    Length,
    RgbImage,
    TriZoneMask,
    Zone,
    assemble_trizone,
)
from .base import (
    Backend,
    JudgeVerdict,
    MaskKind,
    TryOnRequest,
    check_inpaint_args,
    check_prompt,
    parse_verdict,
)

PARSE_PALETTE = {
    0: "background",
    1: "face",
    2: "arms",
    3: "legs",
    4: "upper",
    5: "dress",
    6: "lower",
    7: "torso_skin",
}
DENSEPOSE_PALETTE = {
    0: "background",
    1: "head",
    2: "torso",
    3: "arms",
    4: "upper_leg",
    5: "lower_leg",
}
GARMENT_CLASS = {Category.UPPER: "upper", Category.DRESS: "dress", Category.LOWER: "lower"}
_CLASS_CODE = {name: code for code, name in PARSE_PALETTE.items()}
_PART_CODE = {name: code for code, name in DENSEPOSE_PALETTE.items()}
_SKIN_FOR_PART = {1: "face", 2: "torso_skin", 3: "arms", 4: "legs", 5: "legs"}

BACKGROUND_RGB = (232, 232, 232)
GARMENT_BACKGROUND_RGB = (248, 248, 248)
_SKIN_TONES = [(224, 172, 136), (198, 134, 96), (141, 85, 56), (240, 200, 168)]


def encode(rgb, parse_code: int, part_code: int) -> tuple[int, int, int]:
    r, g, b = (int(v) for v in rgb)
    return r, (g & 0xF8) | part_code, (b & 0xF8) | parse_code


def parse_codes(image: RgbImage) -> np.ndarray:
    return _codes(image, 2, len(PARSE_PALETTE))


def part_codes(image: RgbImage) -> np.ndarray:
    return _codes(image, 1, len(DENSEPOSE_PALETTE))


def _codes(image: RgbImage, channel: int, n_labels: int) -> np.ndarray:
    px = image.pixels
    codes = (px[..., channel] & 7).astype(np.uint8)
    codes[codes >= n_labels] = 0
    codes[np.all(px == px[0, 0], axis=-1)] = 0
    return codes


@dataclass(frozen=True)
class Figure:
    """Body layout on a grid; every range is half-open ``[start, stop)``."""

    grid: ImageGrid
    head_rows: tuple[int, int]
    head_cols: tuple[int, int]
    torso_rows: tuple[int, int]
    torso_cols: tuple[int, int]
    arm_rows: tuple[int, int]
    arm_width: int
    knee_row: int
    foot_row: int
    leg_cols: tuple[int, int]

    @classmethod
    def generate(cls, grid: ImageGrid, rng: np.random.Generator | None = None) -> "Figure":
        h, w = grid.height, grid.width
        jitter = (lambda scale: int(rng.integers(-scale, scale + 1))) if rng is not None else (lambda scale: 0)
        vs = max(1, h // 16)
        hs = max(1, w // 16)
        cx = w // 2 + jitter(hs)
        head0 = max(1, round(0.06 * h))
        head1 = round(0.25 * h) + jitter(vs) // 2
        t1 = round(0.56 * h) + jitter(vs)
        knee = round(0.75 * h) + jitter(vs)
        foot = min(h - 1, round(0.94 * h))
        tw = max(2, round(0.17 * w)) + (jitter(1) if w >= 16 else 0)
        hw = max(1, round(0.1 * w))
        lw = max(1, tw - max(1, w // 32))
        aw = max(1, round(0.07 * w))
        return cls(
            grid=grid,
            head_rows=(head0, head1),
            head_cols=(cx - hw, cx + hw),
            torso_rows=(head1, t1),
            torso_cols=(cx - tw, cx + tw),
            arm_rows=(head1, head1 + max(1, round(0.75 * (t1 - head1)))),
            arm_width=aw,
            knee_row=knee,
            foot_row=foot,
            leg_cols=(cx - lw, cx + lw),
        )

    def part_map(self) -> np.ndarray:
        parts = np.zeros(self.grid.shape, dtype=np.uint8)
        (h0, h1), (hc0, hc1) = self.head_rows, self.head_cols
        (t0, t1), (c0, c1) = self.torso_rows, self.torso_cols
        (a0, a1), aw = self.arm_rows, self.arm_width
        l0, l1 = self.leg_cols
        parts[h0:h1, max(0, hc0):hc1] = _PART_CODE["head"]
        parts[t0:t1, max(0, c0):c1] = _PART_CODE["torso"]
        parts[a0:a1, max(0, c0 - aw):max(0, c0)] = _PART_CODE["arms"]
        parts[a0:a1, c1:c1 + aw] = _PART_CODE["arms"]
        parts[t1:self.knee_row, max(0, l0):l1] = _PART_CODE["upper_leg"]
        parts[self.knee_row:self.foot_row, max(0, l0):l1] = _PART_CODE["lower_leg"]
        parts[0, 0] = 0  # the corner pixel always shows background
        return parts


def coverage(parts: np.ndarray, spec: GarmentSpec) -> np.ndarray:
    """Body pixels a garment of ``spec`` covers, given a DensePose part array."""
    torso = parts == _PART_CODE["torso"]
    upper_leg = parts == _PART_CODE["upper_leg"]
    lower_leg = parts == _PART_CODE["lower_leg"]
    if spec.category is Category.UPPER:
        if spec.length is Length.SHORT:
            return torso
        rows = np.flatnonzero(upper_leg.any(axis=1))
        half = np.zeros_like(upper_leg)
        if rows.size:
            half[rows[0] : rows[0] + math.ceil(rows.size / 2)] = True
        return torso | (upper_leg & half)
    if spec.category is Category.DRESS:
        out = torso | upper_leg
        return out | lower_leg if spec.length is Length.LONG else out
    return upper_leg | lower_leg if spec.length is Length.LONG else upper_leg


def random_color(rng: np.random.Generator) -> tuple[int, int, int]:
    return tuple(int(v) for v in rng.integers(16, 224, size=3))


@dataclass(frozen=True)
class Person:
    image: RgbImage
    parsing: LabelMap
    densepose: LabelMap
    figure: Figure
    outfit: dict  # parse class name -> (GarmentSpec, rgb)


def render_person(grid: ImageGrid, wearing: GarmentSpec, seed: int) -> Person:
    """A standing figure wearing ``wearing`` (plus a complementary garment for tops/bottoms)."""
    rng = np.random.default_rng([seed, 1])
    figure = Figure.generate(grid, rng)
    parts = figure.part_map()
    skin = _SKIN_TONES[int(rng.integers(len(_SKIN_TONES)))]
    outfit: dict[str, tuple[GarmentSpec, tuple[int, int, int]]] = {}
    if wearing.category is Category.UPPER:
        outfit["lower"] = (GarmentSpec(Category.LOWER, Length.LONG), random_color(rng))
        outfit["upper"] = (wearing, random_color(rng))
    elif wearing.category is Category.LOWER:
        outfit["lower"] = (wearing, random_color(rng))
        outfit["upper"] = (GarmentSpec(Category.UPPER, Length.SHORT), random_color(rng))
    else:
        outfit["dress"] = (wearing, random_color(rng))

    labels = np.zeros(grid.shape, dtype=np.uint8)
    for code, name in _SKIN_FOR_PART.items():
        labels[parts == code] = _CLASS_CODE[name]
    for name in ("lower", "upper", "dress"):  # later garments cover earlier ones
        if name in outfit:
            labels[coverage(parts, outfit[name][0])] = _CLASS_CODE[name]

    pixels = np.empty((*grid.shape, 3), dtype=np.uint8)
    pixels[:] = BACKGROUND_RGB
    colors = {name: skin for name in _SKIN_FOR_PART.values()}
    colors.update({name: rgb for name, (_, rgb) in outfit.items()})
    for code, name in PARSE_PALETTE.items():
        if code == 0:
            continue
        sel = labels == code
        if not sel.any():
            continue
        r, g, b = colors[name]
        pixels[sel, 0] = r
        pixels[sel, 1] = (g & 0xF8) | parts[sel]
        pixels[sel, 2] = (b & 0xF8) | code
    return Person(
        RgbImage(grid, pixels),
        LabelMap(grid, labels, PARSE_PALETTE),
        LabelMap(grid, parts, DENSEPOSE_PALETTE),
        figure,
        outfit,
    )


def render_garment(grid: ImageGrid, spec: GarmentSpec, rgb) -> RgbImage:
    """Flat-lay product image: the garment's silhouette on the canonical figure."""
    parts = Figure.generate(grid).part_map()
    pixels = np.empty((*grid.shape, 3), dtype=np.uint8)
    pixels[:] = GARMENT_BACKGROUND_RGB
    pixels[coverage(parts, spec)] = encode(rgb, _CLASS_CODE[GARMENT_CLASS[spec.category]], 0)
    return RgbImage(grid, pixels)


def garment_color(garment: RgbImage) -> np.ndarray | None:
    """Most frequent non-background colour of a garment image (ties: smallest)."""
    px = garment.pixels.reshape(-1, 3)
    fg = px[~np.all(px == garment.pixels[0, 0], axis=-1)]
    if not len(fg):
        return None
    colors, counts = np.unique(fg, axis=0, return_counts=True)
    return colors[int(np.argmax(counts))]


def infer_spec(garment: RgbImage) -> GarmentSpec | None:
    """Recover the GarmentSpec of a flat-lay garment by matching canonical silhouettes."""
    color = garment_color(garment)
    if color is None:
        return None
    code = int(color[2] & 7)
    name = PARSE_PALETTE.get(code)
    category = {v: k for k, v in GARMENT_CLASS.items()}.get(name)
    if category is None:
        return None
    shape = np.all(garment.pixels == color, axis=-1)
    parts = Figure.generate(garment.grid).part_map()
    best = max(
        Length,
        key=lambda length: int((coverage(parts, GarmentSpec(category, length)) == shape).sum()),
    )
    return GarmentSpec(category, best)


def paste_color(base: np.ndarray, where: np.ndarray, rgb) -> None:
    """Paint ``rgb`` into ``where`` keeping each pixel's DensePose bits."""
    r, g, b = (int(v) for v in rgb)
    base[where, 0] = r
    base[where, 1] = (g & 0xF8) | (base[where, 1] & 7)
    base[where, 2] = b


def column_fill(pixels: np.ndarray, region: np.ndarray, fallback) -> np.ndarray:
    """Fill ``region`` column-wise from the nearest outside pixel below, else above.

    The DensePose bits of the filled pixels are kept.
    """
    out = pixels.copy()
    for c in np.flatnonzero(region.any(axis=0)):
        col = region[:, c]
        outside = np.flatnonzero(~col)
        for r in np.flatnonzero(col):
            below = outside[outside > r]
            above = outside[outside < r]
            if below.size:
                src = pixels[below[0], c]
            elif above.size:
                src = pixels[above[-1], c]
            else:
                src = np.array(fallback, dtype=np.uint8)
            out[r, c, 0] = src[0]
            out[r, c, 1] = (int(src[1]) & 0xF8) | (int(pixels[r, c, 1]) & 7)
            out[r, c, 2] = src[2]
    return out


class MockBackend(Backend):
    """Deterministic stand-ins for every model the pipeline drives.

    * try-on, binary mask: paint the garment colour into the mask;
      try-on, tri-zone mask: garment colour in the try-on zone, skin of the
      matching body part in the imagination zone, reconstruction untouched;
      try-on, no mask: replace garments of the same category;
    * inpaint: fill the region column-wise from neighbouring pixels;
    * parse / densepose: decode the annotation bits;
    * tri-zone prediction: the garment's coverage on the body is try-on, the
      remainder of the current garments is imagination;
    * judge: "reasonable" when the result panel differs from the model panel.
    """

    kind = "mock"

    def __init__(self, name: str = "mock", seed: int = 0):
        super().__init__()
        self.endpoint = f"mock://{name}"
        self.seed = seed

    def tryon(self, req: TryOnRequest, key: str | None = None) -> RgbImage:
        return self._timed("tryon", lambda: self._tryon(req))

    def _tryon(self, req: TryOnRequest) -> RgbImage:
        base = req.model_image.pixels.copy()
        color = garment_color(req.garment_image)
        if color is None:
            return RgbImage(req.model_image.grid, base)
        if req.mask_kind is MaskKind.BINARY:
            paste_color(base, req.mask.to_array(), color)
        elif req.mask_kind is MaskKind.TRIZONE:
            zones = req.mask.zones
            imagi = zones == Zone.IMAGI
            self._imagine(base, imagi, req.model_image)
            paste_color(base, zones == Zone.TRYON, color)
        else:
            codes = parse_codes(req.model_image)
            target = int(color[2] & 7)
            paste_color(base, codes == target, color)
        return RgbImage(req.model_image.grid, base)

    @staticmethod
    def _imagine(base: np.ndarray, where: np.ndarray, model: RgbImage) -> None:
        codes = parse_codes(model)
        parts = part_codes(model)
        skin_px = model.pixels[np.isin(codes, [_CLASS_CODE[n] for n in ("face", "arms", "legs", "torso_skin")])]
        skin = skin_px[0] if len(skin_px) else np.array(_SKIN_TONES[0], np.uint8)
        for part, name in _SKIN_FOR_PART.items():
            sel = where & (parts == part)
            base[sel] = encode(skin, _CLASS_CODE[name], part)
        base[where & (parts == 0)] = BACKGROUND_RGB

    def inpaint(self, image: RgbImage, region: BinaryMask, key: str | None = None) -> RgbImage:
        check_inpaint_args(image, region)
        return self._timed(
            "inpaint",
            lambda: RgbImage(image.grid, column_fill(image.pixels, region.to_array(), image.pixels[0, 0])),
        )

    def parse_human(self, image: RgbImage, key: str | None = None) -> LabelMap:
        return self._timed("parse", lambda: LabelMap(image.grid, parse_codes(image), PARSE_PALETTE))

    def densepose(self, image: RgbImage, key: str | None = None) -> LabelMap:
        return self._timed("densepose", lambda: LabelMap(image.grid, part_codes(image), DENSEPOSE_PALETTE))

    def predict_trizone(self, model_image: RgbImage, garment_image: RgbImage, key: str | None = None) -> TriZoneMask:
        return self._timed("trizone", lambda: self._predict(model_image, garment_image))

    def _predict(self, model_image: RgbImage, garment_image: RgbImage) -> TriZoneMask:
        grid = model_image.grid
        spec = infer_spec(garment_image)
        if spec is None:
            return assemble_trizone(BinaryMask.empty(grid), BinaryMask.empty(grid))
        tryon = coverage(part_codes(model_image), spec)
        codes = parse_codes(model_image)
        worn = np.isin(codes, [_CLASS_CODE[n] for n in GARMENT_CLASS.values()])
        return assemble_trizone(BinaryMask.from_array(tryon), BinaryMask.from_array(worn & ~tryon))

    def judge(self, triptych: RgbImage, prompt: str, key: str | None = None) -> JudgeVerdict:
        check_prompt(prompt)

        def run() -> JudgeVerdict:
            third = triptych.grid.width // 3
            left = triptych.pixels[:, :third]
            right = triptych.pixels[:, triptych.grid.width - third :]
            reply = "unreasonable" if np.array_equal(left, right) else "reasonable"
            return parse_verdict(reply)

        return self._timed("judge", run)


class ScriptedJudge(Backend):
    """Judge returning pre-scripted raw replies keyed by request key.

    A reply of ``!timeout`` raises a timeout, simulating a dead endpoint.
    """

    kind = "mock"

    def __init__(self, replies: dict[str, str]):
        super().__init__()
        self.endpoint = "mock://scripted-judge"
        self.replies = dict(replies)

    def judge(self, triptych: RgbImage, prompt: str, key: str | None = None) -> JudgeVerdict:
        check_prompt(prompt)
        reply = self.replies.get(key or "")
        if reply is None:
            raise BackendTimeout(f"no scripted reply for {key!r}")
        if reply.strip() == "!timeout":
            raise BackendTimeout(f"scripted timeout for {key!r}")
        return self._timed("judge", lambda: parse_verdict(reply))
