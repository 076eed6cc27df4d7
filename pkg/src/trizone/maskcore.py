"""Raster types and exact per-pixel set operations.

Every raster lives on an :class:`ImageGrid`. Row 0 is the top of the image and
"down" means increasing row index. Binary masks are packed bitsets (see
:mod:`trizone.kernels`); all operations are whole-raster and pure, and every
object is immutable after construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from . import kernels
from .errors import GridMismatch, OverlapError, UnknownClass

BACKGROUND = "background"


def _frozen(a: np.ndarray) -> np.ndarray:
    if not a.flags.writeable and a.flags.c_contiguous:
        return a
    a = np.array(a, order="C", copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ImageGrid:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return self.width * self.height

    @classmethod
    def of(cls, array: np.ndarray) -> "ImageGrid":
        return cls(width=int(array.shape[1]), height=int(array.shape[0]))


def same_grid(*items) -> ImageGrid:
    """Return the common grid of ``items`` or raise :class:`GridMismatch`."""
    grids = {item.grid for item in items}
    if len(grids) != 1:
        raise GridMismatch(f"rasters on different grids: {sorted((g.width, g.height) for g in grids)}")
    return grids.pop()


@dataclass(frozen=True, eq=False)
class RgbImage:
    grid: ImageGrid
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8 or px.shape != (*self.grid.shape, 3):
            raise GridMismatch(f"pixels {px.shape}/{px.dtype} do not fit grid {self.grid}")
        object.__setattr__(self, "pixels", _frozen(px))

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "RgbImage":
        px = np.asarray(pixels, dtype=np.uint8)
        return cls(ImageGrid.of(px), px)

    @classmethod
    def filled(cls, grid: ImageGrid, color: tuple[int, int, int]) -> "RgbImage":
        return cls(grid, np.broadcast_to(np.array(color, np.uint8), (*grid.shape, 3)).copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.grid, self.pixels.tobytes()))


class BinaryMask:
    """Packed-bitset boolean raster."""

    __slots__ = ("grid", "words")

    def __init__(self, grid: ImageGrid, words: np.ndarray):
        words = np.asarray(words, dtype=np.uint64)
        if words.shape != (kernels.n_words(grid.area),):
            raise GridMismatch(f"{words.size} words do not fit grid {grid}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "words", _frozen(words))

    def __setattr__(self, name, value):
        raise AttributeError("BinaryMask is immutable")

    @classmethod
    def from_array(cls, bits: np.ndarray) -> "BinaryMask":
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise GridMismatch(f"mask array must be 2-D, got shape {bits.shape}")
        return cls(ImageGrid.of(bits), kernels.pack(bits != 0))

    @classmethod
    def empty(cls, grid: ImageGrid) -> "BinaryMask":
        return cls(grid, np.zeros(kernels.n_words(grid.area), np.uint64))

    @classmethod
    def full(cls, grid: ImageGrid) -> "BinaryMask":
        return cls.empty(grid).complement()

    def to_array(self) -> np.ndarray:
        return kernels.unpack(self.words, self.grid.area).reshape(self.grid.shape).astype(bool)

    def count(self) -> int:
        return kernels.popcount(self.words)

    def is_empty(self) -> bool:
        return not self.words.any()

    def union(self, other: "BinaryMask") -> "BinaryMask":
        same_grid(self, other)
        return BinaryMask(self.grid, kernels.bit_or(self.words, other.words))

    def intersect(self, other: "BinaryMask") -> "BinaryMask":
        same_grid(self, other)
        return BinaryMask(self.grid, kernels.bit_and(self.words, other.words))

    def difference(self, other: "BinaryMask") -> "BinaryMask":
        same_grid(self, other)
        return BinaryMask(self.grid, kernels.bit_andnot(self.words, other.words))

    def complement(self) -> "BinaryMask":
        return BinaryMask(self.grid, kernels.bit_not(self.words, self.grid.area))

    def issubset(self, other: "BinaryMask") -> bool:
        return self.difference(other).is_empty()

    def isdisjoint(self, other: "BinaryMask") -> bool:
        return self.intersect(other).is_empty()

    __or__ = union
    __and__ = intersect
    __sub__ = difference
    __invert__ = complement
    __le__ = issubset

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.grid, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.grid.width}x{self.grid.height}, {self.count()} set)"


def mask_union(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    return a.union(b)


def mask_intersect(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    return a.intersect(b)


def mask_difference(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    return a.difference(b)


def mask_complement(a: BinaryMask) -> BinaryMask:
    return a.complement()


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class labels with a label -> class-name palette.

    Label 0 is always the background class.
    """

    grid: ImageGrid
    labels: np.ndarray  # (height, width) uint8
    palette: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels)
        if lab.dtype != np.uint8 or lab.shape != self.grid.shape:
            raise GridMismatch(f"labels {lab.shape}/{lab.dtype} do not fit grid {self.grid}")
        palette = {int(k): str(v) for k, v in dict(self.palette).items()}
        if palette.get(0) != BACKGROUND:
            raise ValueError("palette must map label 0 to 'background'")
        if len(set(palette.values())) != len(palette):
            raise ValueError("palette class names must be unique")
        stray = set(np.unique(lab).tolist()) - set(palette)
        if stray:
            raise UnknownClass(f"labels {sorted(stray)} are not in the palette")
        object.__setattr__(self, "labels", _frozen(lab))
        object.__setattr__(self, "palette", palette)

    @classmethod
    def from_array(cls, labels: np.ndarray, palette: Mapping[int, str]) -> "LabelMap":
        lab = np.asarray(labels, dtype=np.uint8)
        return cls(ImageGrid.of(lab), lab, palette)

    def label_of(self, class_name: str) -> int:
        for label, name in self.palette.items():
            if name == class_name:
                return label
        raise UnknownClass(f"class {class_name!r} not in palette {sorted(self.palette.values())}")

    @property
    def class_names(self) -> list[str]:
        return [self.palette[k] for k in sorted(self.palette)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.palette == other.palette
            and np.array_equal(self.labels, other.labels)
        )

    def __hash__(self) -> int:
        return hash((self.grid, self.labels.tobytes(), tuple(sorted(self.palette.items()))))


def extract_class_mask(label_map: LabelMap, class_name: str) -> BinaryMask:
    label = label_map.label_of(class_name)
    return BinaryMask(label_map.grid, kernels.pack_equal(label_map.labels, label))


def extract_parts_mask(label_map: LabelMap, class_names: Iterable[str]) -> BinaryMask:
    out = BinaryMask.empty(label_map.grid)
    for name in class_names:
        out = out | extract_class_mask(label_map, name)
    return out


def foreground_mask(label_map: LabelMap) -> BinaryMask:
    return BinaryMask(label_map.grid, kernels.pack_not_equal(label_map.labels, 0))


class Zone(enum.IntEnum):
    """Tri-zone codes; also the pixel values of the serialized mask."""

    RECON = 0
    IMAGI = 1
    TRYON = 2


@dataclass(frozen=True, eq=False)
class TriZoneMask:
    grid: ImageGrid
    zones: np.ndarray  # (height, width) uint8 holding Zone codes

    def __post_init__(self) -> None:
        z = np.asarray(self.zones)
        if z.dtype != np.uint8 or z.shape != self.grid.shape:
            raise GridMismatch(f"zones {z.shape}/{z.dtype} do not fit grid {self.grid}")
        if z.size and int(z.max()) > max(Zone):
            raise ValueError(f"invalid zone code {int(z.max())}")
        object.__setattr__(self, "zones", _frozen(z))

    def zone_mask(self, zone: Zone) -> BinaryMask:
        return BinaryMask(self.grid, kernels.pack_equal(self.zones, int(zone)))

    @property
    def tryon(self) -> BinaryMask:
        return self.zone_mask(Zone.TRYON)

    @property
    def recon(self) -> BinaryMask:
        return self.zone_mask(Zone.RECON)

    @property
    def imagi(self) -> BinaryMask:
        return self.zone_mask(Zone.IMAGI)

    def split(self) -> tuple[BinaryMask, BinaryMask, BinaryMask]:
        """(tryon, recon, imagi)."""
        return self.tryon, self.recon, self.imagi

    def histogram(self) -> dict[Zone, int]:
        counts = np.bincount(self.zones.reshape(-1), minlength=len(Zone))
        return {zone: int(counts[zone]) for zone in Zone}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TriZoneMask):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.zones, other.zones)

    def __hash__(self) -> int:
        return hash((self.grid, self.zones.tobytes()))


def assemble_trizone(tryon: BinaryMask, imagi: BinaryMask) -> TriZoneMask:
    grid = same_grid(tryon, imagi)
    if not tryon.isdisjoint(imagi):
        raise OverlapError(f"try-on and imagination zones share {(tryon & imagi).count()} pixels")
    zones = np.zeros(grid.shape, dtype=np.uint8)
    zones[imagi.to_array()] = Zone.IMAGI
    zones[tryon.to_array()] = Zone.TRYON
    return TriZoneMask(grid, zones)


class Box(NamedTuple):
    top: int
    left: int
    bottom: int
    right: int

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1


def bounding_box(mask: BinaryMask) -> Box | None:
    if mask.is_empty():
        return None
    bits = mask.to_array()
    rows = np.flatnonzero(bits.any(axis=1))
    cols = np.flatnonzero(bits.any(axis=0))
    return Box(int(rows[0]), int(cols[0]), int(rows[-1]), int(cols[-1]))


class Category(str, enum.Enum):
    UPPER = "upper"
    DRESS = "dress"
    LOWER = "lower"


class Length(str, enum.Enum):
    SHORT = "short"
    LONG = "long"


# Fine garment names mapped onto the three construction categories.
FINE_CATEGORIES: dict[str, Category] = {
    "upper": Category.UPPER,
    "top": Category.UPPER,
    "tops": Category.UPPER,
    "dress": Category.DRESS,
    "dresses": Category.DRESS,
    "lower": Category.LOWER,
    "pants": Category.LOWER,
    "skirt": Category.LOWER,
    "skirts": Category.LOWER,
}


@dataclass(frozen=True, order=True)
class GarmentSpec:
    category: Category
    length: Length

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "length", Length(self.length))

    def __str__(self) -> str:
        return f"{self.category.value}/{self.length.value}"

    @classmethod
    def parse(cls, token: str) -> "GarmentSpec":
        """Parse ``category/length`` or a fine ``name-length`` token such as ``skirt-long``."""
        text = token.strip().lower()
        for sep in ("/", "-", "_"):
            if sep in text:
                name, length = text.split(sep, 1)
                break
        else:
            raise ValueError(f"garment spec {token!r} is not of the form category/length")
        if name in ("short", "long"):  # "long-skirt" word order
            name, length = length, name
        try:
            return cls(FINE_CATEGORIES[name], Length(length))
        except (KeyError, ValueError):
            raise ValueError(f"unrecognised garment spec {token!r}") from None


ALL_SPECS: tuple[GarmentSpec, ...] = tuple(
    GarmentSpec(c, l) for c in Category for l in Length
)
