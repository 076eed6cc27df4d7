import numpy as np
import pytest
from hypothesis import given
from hypothesis.extra.numpy import arrays

import oracles
from trizone.maskcore import BinaryMask, LabelMap, Zone
from trizone.zonealgebra import (
    Precedence,
    Round1Inputs,
    Round2Inputs,
    build_trizone_gt,
    imagination_zone_round1,
    imagination_zone_round2,
    round1_gt,
    round2_gt,
    tryon_zone,
)

M = lambda a: BinaryMask.from_array(a)  # noqa: E731
masks = arrays(np.bool_, (8, 8))


@given(masks, masks, masks)
def test_round1_matches_per_pixel_oracle(gen, fg, tryon):
    got = imagination_zone_round1(M(gen), M(fg), M(tryon)).to_array()
    want = oracles.imagi_round1(*map(oracles.to_lists, (gen, fg, tryon)))
    assert got.tolist() == want


@pytest.mark.parametrize("precedence", list(Precedence))
@given(tp=masks, ip=masks, fg=masks, tg=masks)
def test_round2_matches_per_pixel_oracle(precedence, tp, ip, fg, tg):
    got = imagination_zone_round2(M(tp), M(ip), M(fg), M(tg), precedence).to_array()
    want = oracles.imagi_round2(
        *map(oracles.to_lists, (tp, ip, fg, tg)), union_first=precedence is Precedence.UNION_FIRST
    )
    assert got.tolist() == want


def test_precedence_readings_differ_outside_foreground():
    one = np.ones((1, 1), bool)
    zero = np.zeros((1, 1), bool)
    union_first = imagination_zone_round2(M(one), M(zero), M(zero), M(zero), Precedence.UNION_FIRST)
    intersect_first = imagination_zone_round2(M(one), M(zero), M(zero), M(zero), Precedence.INTERSECT_FIRST)
    assert union_first.count() == 0 and intersect_first.count() == 1


@given(masks, masks, masks)
def test_round1_gt_partition(gen, fg, parse_bits):
    labels = parse_bits.astype(np.uint8) * 4
    pm = LabelMap.from_array(labels, {0: "background", 4: "upper"})
    tz = round1_gt(Round1Inputs(pm, "upper", M(gen), M(fg)))
    assert np.array_equal(tz.zones == Zone.TRYON, parse_bits)
    expected = oracles.zone_codes(oracles.to_lists(parse_bits), oracles.imagi_round1(
        *map(oracles.to_lists, (gen, fg, parse_bits))))
    assert tz.zones.tolist() == expected


def test_round2_gt_and_empty_tryon():
    pm = LabelMap.from_array(np.zeros((3, 3), np.uint8), {0: "background", 5: "dress"})
    assert tryon_zone(pm, "dress").is_empty()
    full = np.ones((3, 3), bool)
    tz = round2_gt(Round2Inputs(pm, "dress", M(full), M(~full), M(full)))
    assert (tz.zones == Zone.IMAGI).all()


def test_build_trizone_gt_recon_is_complement():
    t = np.eye(4, dtype=bool)
    i = np.zeros((4, 4), bool)
    i[0, 3] = True
    tz = build_trizone_gt(M(t), M(i))
    assert np.array_equal(tz.zones == Zone.RECON, ~(t | i))
