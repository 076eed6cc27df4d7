import numpy as np
import pytest
from hypothesis import given
from hypothesis.extra.numpy import arrays

from trizone.errors import GridMismatch, OverlapError, UnknownClass
from trizone.maskcore import (
    BinaryMask,
    GarmentSpec,
    ImageGrid,
    LabelMap,
    RgbImage,
    TriZoneMask,
    Zone,
    assemble_trizone,
    bounding_box,
    extract_class_mask,
    extract_parts_mask,
    foreground_mask,
)


def bool_arrays(h=9, w=13):
    return arrays(np.bool_, (h, w))


@given(bool_arrays(), bool_arrays())
def test_set_operations_match_numpy(a, b):
    ma, mb = BinaryMask.from_array(a), BinaryMask.from_array(b)
    assert np.array_equal((ma | mb).to_array(), a | b)
    assert np.array_equal((ma & mb).to_array(), a & b)
    assert np.array_equal((ma - mb).to_array(), a & ~b)
    assert np.array_equal(ma.complement().to_array(), ~a)
    assert ma.count() == int(a.sum())
    assert ma.issubset(ma | mb)
    assert (ma - mb).isdisjoint(mb)


@given(bool_arrays(5, 7))
def test_complement_keeps_padding_bits_clear(a):
    m = BinaryMask.from_array(a)
    assert m.complement().complement() == m
    assert m.complement().count() == a.size - int(a.sum())


def test_grid_mismatch_is_rejected():
    a = BinaryMask.empty(ImageGrid(4, 4))
    b = BinaryMask.empty(ImageGrid(4, 5))
    with pytest.raises(GridMismatch):
        a | b


def test_masks_are_immutable():
    m = BinaryMask.full(ImageGrid(3, 2))
    with pytest.raises(AttributeError):
        m.grid = ImageGrid(1, 1)
    with pytest.raises(ValueError):
        m.words[0] = 0


def test_class_extraction_and_unknown_class():
    labels = np.array([[0, 1, 2], [2, 2, 0]], dtype=np.uint8)
    lm = LabelMap.from_array(labels, {0: "background", 1: "face", 2: "upper"})
    assert np.array_equal(extract_class_mask(lm, "upper").to_array(), labels == 2)
    assert np.array_equal(extract_parts_mask(lm, ["face", "upper"]).to_array(), labels > 0)
    assert np.array_equal(foreground_mask(lm).to_array(), labels != 0)
    with pytest.raises(UnknownClass):
        extract_class_mask(lm, "shoes")


def test_assemble_trizone_codes_and_overlap():
    grid = ImageGrid(3, 1)
    tryon = BinaryMask.from_array(np.array([[1, 0, 0]], bool))
    imagi = BinaryMask.from_array(np.array([[0, 1, 0]], bool))
    tz = assemble_trizone(tryon, imagi)
    assert tz.zones.tolist() == [[Zone.TRYON, Zone.IMAGI, Zone.RECON]]
    assert tz.grid == grid
    with pytest.raises(OverlapError):
        assemble_trizone(tryon, tryon)


@given(bool_arrays(), bool_arrays())
def test_trizone_partition(a, b):
    tryon = BinaryMask.from_array(a)
    imagi = BinaryMask.from_array(b & ~a)
    tz = assemble_trizone(tryon, imagi)
    t, r, i = tz.split()
    assert t.isdisjoint(r) and t.isdisjoint(i) and r.isdisjoint(i)
    assert (t | r | i) == BinaryMask.full(tz.grid)
    assert sum(tz.histogram().values()) == tz.grid.area


def test_trizone_rejects_bad_codes():
    with pytest.raises(ValueError):
        TriZoneMask(ImageGrid(1, 1), np.array([[3]], np.uint8))


def test_bounding_box():
    a = np.zeros((6, 5), bool)
    a[2:4, 1] = True
    a[3, 3] = True
    box = bounding_box(BinaryMask.from_array(a))
    assert tuple(box) == (2, 1, 3, 3)
    assert box.height == 2
    assert bounding_box(BinaryMask.from_array(np.zeros((2, 2), bool))) is None


@pytest.mark.parametrize(
    "token, expected",
    [
        ("upper/short", "upper/short"),
        ("skirt-long", "lower/long"),
        ("long-skirt", "lower/long"),
        ("Dresses_short", "dress/short"),
        ("pants/long", "lower/long"),
    ],
)
def test_garment_spec_parse(token, expected):
    assert str(GarmentSpec.parse(token)) == expected


@pytest.mark.parametrize("token", ["hat/short", "upper", "upper/medium", ""])
def test_garment_spec_parse_rejects(token):
    with pytest.raises(ValueError):
        GarmentSpec.parse(token)


def test_rgb_image_validation():
    with pytest.raises(GridMismatch):
        RgbImage.from_array(np.zeros((2, 2), np.uint8))
    img = RgbImage.filled(ImageGrid(2, 3), (1, 2, 3))
    assert img.pixels.shape == (3, 2, 3)
    assert img == RgbImage.from_array(img.pixels.copy())
