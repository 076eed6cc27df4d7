"""JSON payloads for the HTTP protocol (documented in docs/protocol.md).

Images travel as base64 PNG strings. Field names here are frozen.
"""

from __future__ import annotations

from typing import Any

from .. import imageio
from ..errors import FormatError, ProtocolError
from ..maskcore import BinaryMask, LabelMap, RgbImage, TriZoneMask
from .base import MaskKind, TryOnRequest

PATHS = {
    "tryon": "/tryon",
    "inpaint": "/inpaint",
    "parse": "/parse",
    "densepose": "/densepose",
    "trizone": "/trizone",
    "judge": "/judge",
}


def _field(body: dict, name: str, kind: type = str) -> Any:
    if not isinstance(body, dict) or name not in body:
        raise ProtocolError(f"payload is missing field {name!r}")
    value = body[name]
    if not isinstance(value, kind):
        raise ProtocolError(f"field {name!r} must be {kind.__name__}")
    return value


def _image(body: dict, name: str) -> RgbImage:
    try:
        return imageio.rgb_from_png(imageio.unb64(_field(body, name)))
    except FormatError as exc:
        raise ProtocolError(f"field {name!r}: {exc}") from exc


def _mask(body: dict, name: str) -> BinaryMask:
    try:
        return imageio.mask_from_png(imageio.unb64(_field(body, name)))
    except FormatError as exc:
        raise ProtocolError(f"field {name!r}: {exc}") from exc


def _trizone(body: dict, name: str) -> TriZoneMask:
    try:
        return imageio.trizone_from_png(imageio.unb64(_field(body, name)))
    except FormatError as exc:
        raise ProtocolError(f"field {name!r}: {exc}") from exc


def _img(image: RgbImage) -> str:
    return imageio.b64(imageio.rgb_to_png(image))


# requests

def tryon_request(req: TryOnRequest) -> dict:
    if req.mask_kind is MaskKind.BINARY:
        mask = imageio.b64(imageio.mask_to_png(req.mask))
    elif req.mask_kind is MaskKind.TRIZONE:
        mask = imageio.b64(imageio.trizone_to_png(req.mask))
    else:
        mask = None
    return {
        "model_image": _img(req.model_image),
        "garment_image": _img(req.garment_image),
        "mask": mask,
        "mask_kind": req.mask_kind.value,
    }


def read_tryon_request(body: dict) -> TryOnRequest:
    try:
        kind = MaskKind(_field(body, "mask_kind"))
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc
    mask: BinaryMask | TriZoneMask | None = None
    if kind is MaskKind.BINARY:
        mask = _mask(body, "mask")
    elif kind is MaskKind.TRIZONE:
        mask = _trizone(body, "mask")
    try:
        return TryOnRequest(_image(body, "model_image"), _image(body, "garment_image"), mask, kind)
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc


def inpaint_request(image: RgbImage, region: BinaryMask) -> dict:
    return {"image": _img(image), "region": imageio.b64(imageio.mask_to_png(region))}


def read_inpaint_request(body: dict) -> tuple[RgbImage, BinaryMask]:
    return _image(body, "image"), _mask(body, "region")


def image_request(image: RgbImage) -> dict:
    return {"image": _img(image)}


def read_image_request(body: dict) -> RgbImage:
    return _image(body, "image")


def trizone_request(model_image: RgbImage, garment_image: RgbImage) -> dict:
    return {"model_image": _img(model_image), "garment_image": _img(garment_image)}


def read_trizone_request(body: dict) -> tuple[RgbImage, RgbImage]:
    return _image(body, "model_image"), _image(body, "garment_image")


def judge_request(image: RgbImage, prompt: str) -> dict:
    return {"image": _img(image), "prompt": prompt}


def read_judge_request(body: dict) -> tuple[RgbImage, str]:
    return _image(body, "image"), _field(body, "prompt")


# responses

def image_response(image: RgbImage) -> dict:
    return {"image": _img(image)}


def read_image_response(body: dict) -> RgbImage:
    return _image(body, "image")


def labels_response(label_map: LabelMap) -> dict:
    return {
        "labels": imageio.b64(imageio.labels_to_png(label_map)),
        "palette": {str(k): v for k, v in sorted(label_map.palette.items())},
    }


def read_labels_response(body: dict) -> LabelMap:
    palette = _field(body, "palette", dict)
    try:
        return imageio.labels_from_png(
            imageio.unb64(_field(body, "labels")), {int(k): str(v) for k, v in palette.items()}
        )
    except (FormatError, ValueError, KeyError) as exc:
        raise ProtocolError(f"bad label map: {exc}") from exc


def trizone_response(mask: TriZoneMask) -> dict:
    return {"mask": imageio.b64(imageio.trizone_to_png(mask))}


def read_trizone_response(body: dict) -> TriZoneMask:
    return _trizone(body, "mask")


def judge_response(reply: str) -> dict:
    return {"reply": reply}


def read_judge_response(body: dict) -> str:
    return _field(body, "reply")
