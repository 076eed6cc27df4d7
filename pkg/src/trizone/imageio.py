"""PNG serialization for rasters.

* ``RgbImage``: 8-bit RGB PNG.
* ``LabelMap``: 8-bit grayscale PNG of label indices plus a UTF-8 palette
  sidecar (same stem, ``.palette`` suffix) with one ``label=name`` line per class.
* ``TriZoneMask``: 8-bit grayscale PNG with RECON=0, IMAGI=1, TRYON=2.
* ``BinaryMask``: 8-bit grayscale PNG, 0 or 255 (any nonzero reads as set).
"""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .maskcore import BinaryMask, LabelMap, RgbImage, TriZoneMask, ImageGrid, Zone

PathLike = str | Path


def _encode(array: np.ndarray, mode: str) -> bytes:
    buf = io.BytesIO()
    image = Image.fromarray(np.ascontiguousarray(array, dtype=np.uint8))
    if image.mode != mode:
        raise FormatError(f"array of shape {array.shape} does not encode as {mode}")
    image.save(buf, format="PNG")
    return buf.getvalue()


def _decode(data: bytes, mode: str) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG":
                raise FormatError(f"expected PNG, got {im.format}")
            if im.mode != mode:
                if mode == "L" and im.mode in ("1", "P", "I;16"):
                    raise FormatError(f"expected 8-bit single-channel PNG, got mode {im.mode}")
                im = im.convert(mode)
            return np.array(im, dtype=np.uint8)
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"undecodable PNG: {exc}") from exc


def rgb_to_png(image: RgbImage) -> bytes:
    return _encode(image.pixels, "RGB")


def rgb_from_png(data: bytes) -> RgbImage:
    return RgbImage.from_array(_decode(data, "RGB"))


def trizone_to_png(mask: TriZoneMask) -> bytes:
    return _encode(mask.zones, "L")


def trizone_from_png(data: bytes) -> TriZoneMask:
    zones = _decode(data, "L")
    bad = zones > max(Zone)
    if bad.any():
        raise FormatError(f"{int(bad.sum())} pixels carry invalid zone codes")
    return TriZoneMask(ImageGrid.of(zones), zones)


def mask_to_png(mask: BinaryMask) -> bytes:
    return _encode(mask.to_array().astype(np.uint8) * 255, "L")


def mask_from_png(data: bytes) -> BinaryMask:
    return BinaryMask.from_array(_decode(data, "L") != 0)


def labels_to_png(label_map: LabelMap) -> bytes:
    return _encode(label_map.labels, "L")


def labels_from_png(data: bytes, palette: dict[int, str]) -> LabelMap:
    return LabelMap.from_array(_decode(data, "L"), palette)


def format_palette(palette: dict[int, str]) -> str:
    return "".join(f"{label}={palette[label]}\n" for label in sorted(palette))


def parse_palette(text: str) -> dict[int, str]:
    palette: dict[int, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, name = line.partition("=")
        if not sep or not key.strip().isdigit() or not name.strip():
            raise FormatError(f"palette line {lineno}: expected 'label=name', got {line!r}")
        palette[int(key)] = name.strip()
    return palette


def palette_path(png_path: PathLike) -> Path:
    return Path(png_path).with_suffix(".palette")


# file helpers

def write_rgb(path: PathLike, image: RgbImage) -> None:
    Path(path).write_bytes(rgb_to_png(image))


def read_rgb(path: PathLike) -> RgbImage:
    return rgb_from_png(_read(path))


def write_mask(path: PathLike, mask: BinaryMask) -> None:
    Path(path).write_bytes(mask_to_png(mask))


def read_mask(path: PathLike) -> BinaryMask:
    return mask_from_png(_read(path))


def write_trizone(path: PathLike, mask: TriZoneMask) -> None:
    Path(path).write_bytes(trizone_to_png(mask))


def read_trizone(path: PathLike) -> TriZoneMask:
    return trizone_from_png(_read(path))


def write_label_map(path: PathLike, label_map: LabelMap) -> None:
    Path(path).write_bytes(labels_to_png(label_map))
    palette_path(path).write_text(format_palette(label_map.palette), encoding="utf-8")


def read_label_map(path: PathLike, palette_file: PathLike | None = None) -> LabelMap:
    side = Path(palette_file) if palette_file else palette_path(path)
    try:
        text = side.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"palette sidecar unreadable: {side}") from exc
    return labels_from_png(_read(path), parse_palette(text))


def _read(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from exc


# wire helpers

def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise FormatError(f"invalid base64 payload: {exc}") from exc
