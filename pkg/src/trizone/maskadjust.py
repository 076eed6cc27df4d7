"""Lower-boundary mask adjustment for size-mismatched same-category pairs.

Two strategies move the lower edge of a generation region:

* stretch-down extends every column of the region to the lowest row of a
  DensePose body part (for building a longer garment);
* shrink-up clears a random number of bottom rows of the region's bounding
  box (for building a shorter garment); the cleared pixels form a residual
  that an inpainting model must complete afterwards.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyMask, UnknownPart
from .maskcore import BinaryMask, LabelMap, RgbImage, bounding_box, extract_class_mask, same_grid

DEFAULT_SHRINK_RANGE = (0.15, 0.45)
DEFAULT_STRETCH_PART = "upper_leg"


class ShiftMode(str, enum.Enum):
    STRETCH_DOWN = "stretch-down"
    SHRINK_UP = "shrink-up"


@dataclass(frozen=True)
class ShiftPolicy:
    mode: ShiftMode
    densepose_target_part: str = DEFAULT_STRETCH_PART
    shrink_fraction_range: tuple[float, float] = DEFAULT_SHRINK_RANGE
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ShiftMode(self.mode))
        lo, hi = self.shrink_fraction_range
        object.__setattr__(self, "shrink_fraction_range", (float(lo), float(hi)))
        if self.mode is ShiftMode.SHRINK_UP and not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"shrink_fraction_range must satisfy 0 < min <= max < 1, got {(lo, hi)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> "ShiftPolicy":
        return ShiftPolicy(self.mode, self.densepose_target_part, self.shrink_fraction_range, seed)


@dataclass(frozen=True)
class AdjustedMask:
    adjusted: BinaryMask
    residual: BinaryMask
    shift: int = 0  # rows removed by shrink-up; 0 for stretch-down


def stretch_down(gen: BinaryMask, densepose: LabelMap, policy: ShiftPolicy) -> AdjustedMask:
    """Extend each column of ``gen`` down to the lowest row of the target part.

    Each column is filled from its topmost ``gen`` row to the lowest target-part
    row, so the result is a superset of ``gen`` and monotone in ``gen``.
    Columns where the part is absent or lies above the region are unchanged.
    """
    if policy.mode is not ShiftMode.STRETCH_DOWN:
        raise ValueError(f"stretch_down needs a stretch-down policy, got {policy.mode.value}")
    same_grid(gen, densepose)
    try:
        part = extract_class_mask(densepose, policy.densepose_target_part)
    except KeyError:
        raise UnknownPart(f"densepose part {policy.densepose_target_part!r} not in palette") from None
    filled = kernels.stretch_columns(gen.to_array().view(np.uint8), part.to_array().view(np.uint8))
    return AdjustedMask(BinaryMask.from_array(filled), BinaryMask.empty(gen.grid))


def shrink_amount(box_height: int, policy: ShiftPolicy) -> int:
    lo, hi = policy.shrink_fraction_range
    u = lo if lo == hi else np.random.default_rng(policy.seed).uniform(lo, hi)
    return int(round(u * box_height))


def shrink_up(gen: BinaryMask, policy: ShiftPolicy) -> AdjustedMask:
    """Clear the bottom ``round(u * box_height)`` rows of ``gen``'s bounding box."""
    if policy.mode is not ShiftMode.SHRINK_UP:
        raise ValueError(f"shrink_up needs a shrink-up policy, got {policy.mode.value}")
    box = bounding_box(gen)
    if box is None:
        raise EmptyMask("cannot shrink an empty generation region")
    shift = shrink_amount(box.height, policy)
    bits = gen.to_array()
    if shift:
        bits[box.bottom - shift + 1 : box.bottom + 1, :] = False
    adjusted = BinaryMask.from_array(bits)
    return AdjustedMask(adjusted, gen - adjusted, shift)


def adjust(gen: BinaryMask, policy: ShiftPolicy, densepose: LabelMap | None = None) -> AdjustedMask:
    if policy.mode is ShiftMode.STRETCH_DOWN:
        if densepose is None:
            raise ValueError("stretch-down needs a densepose map")
        return stretch_down(gen, densepose, policy)
    return shrink_up(gen, policy)


@dataclass(frozen=True)
class InpaintRequest:
    """Payload for an inpainting backend: complete ``region`` of ``image``."""

    image: RgbImage
    region: BinaryMask

    @property
    def is_noop(self) -> bool:
        return self.region.is_empty()


def inpaint_request(image: RgbImage, residual: BinaryMask) -> InpaintRequest:
    same_grid(image, residual)
    return InpaintRequest(image, residual)
