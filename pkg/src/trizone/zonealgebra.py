"""Ground-truth tri-zone construction for both construction rounds."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .maskcore import (
    BinaryMask,
    LabelMap,
    TriZoneMask,
    assemble_trizone,
    extract_class_mask,
    same_grid,
)


class Precedence(str, enum.Enum):
    """How ``tryon_p ∪ imagi_p ∩ fg`` groups in the round-2 imagination formula.

    ``UNION_FIRST`` is ``(tryon_p ∪ imagi_p) ∩ fg`` (the default, mirroring the
    round-1 formula which clips the whole generated area to the foreground).
    ``INTERSECT_FIRST`` is ``tryon_p ∪ (imagi_p ∩ fg)``.
    """

    UNION_FIRST = "union-first"
    INTERSECT_FIRST = "intersect-first"


@dataclass(frozen=True)
class Round1Inputs:
    pm_g: LabelMap
    garment_class: str
    gen_region: BinaryMask
    fg_c: BinaryMask

    def __post_init__(self) -> None:
        same_grid(self.pm_g, self.gen_region, self.fg_c)


@dataclass(frozen=True)
class Round2Inputs:
    pm_g2: LabelMap
    garment_class: str
    tryon_p: BinaryMask
    imagi_p: BinaryMask
    fg_c: BinaryMask

    def __post_init__(self) -> None:
        same_grid(self.pm_g2, self.tryon_p, self.imagi_p, self.fg_c)


def tryon_zone(pm_g: LabelMap, garment_class: str) -> BinaryMask:
    """Pixels of the ground-truth garment in the ground-truth parsing map.

    An all-background map gives an empty zone; callers flag such records.
    """
    return extract_class_mask(pm_g, garment_class)


def imagination_zone_round1(gen_region: BinaryMask, fg_c: BinaryMask, tryon: BinaryMask) -> BinaryMask:
    """``(gen ∩ fg_c) − tryon``."""
    same_grid(gen_region, fg_c, tryon)
    return (gen_region & fg_c) - tryon


def imagination_zone_round2(
    tryon_p: BinaryMask,
    imagi_p: BinaryMask,
    fg_c: BinaryMask,
    tryon_g: BinaryMask,
    precedence: Precedence | str = Precedence.UNION_FIRST,
) -> BinaryMask:
    same_grid(tryon_p, imagi_p, fg_c, tryon_g)
    if Precedence(precedence) is Precedence.UNION_FIRST:
        generated = (tryon_p | imagi_p) & fg_c
    else:
        generated = tryon_p | (imagi_p & fg_c)
    return generated - tryon_g


def build_trizone_gt(tryon: BinaryMask, imagi: BinaryMask) -> TriZoneMask:
    """Assemble the GT mask; reconstruction is everything else."""
    return assemble_trizone(tryon, imagi)


def round1_gt(inputs: Round1Inputs) -> TriZoneMask:
    tryon = tryon_zone(inputs.pm_g, inputs.garment_class)
    return build_trizone_gt(tryon, imagination_zone_round1(inputs.gen_region, inputs.fg_c, tryon))


def round2_gt(inputs: Round2Inputs, precedence: Precedence | str = Precedence.UNION_FIRST) -> TriZoneMask:
    tryon = tryon_zone(inputs.pm_g2, inputs.garment_class)
    imagi = imagination_zone_round2(inputs.tryon_p, inputs.imagi_p, inputs.fg_c, tryon, precedence)
    return build_trizone_gt(tryon, imagi)
