"""Dense float64 tensors and the flat parameter file format."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import FormatError, ShapeMismatch

PARAMS_MAGIC = b"TZPARAM1"


@dataclass(frozen=True)
class Tensor:
    """Row-major float64 values with an explicit shape."""

    shape: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        shape = tuple(int(d) for d in self.shape)
        values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise ShapeMismatch(f"{values.size} values do not fill shape {shape}")
        values.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, array) -> "Tensor":
        a = np.asarray(array, dtype=np.float64)
        return cls(a.shape, a)

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.shape)


def as_array(x) -> np.ndarray:
    return x.array if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def save_params(path: str | Path, params: Mapping[str, np.ndarray]) -> None:
    """Write parameters as magic, header length, JSON header, then float64 data.

    Layout: 8-byte magic ``TZPARAM1``; little-endian uint32 header length;
    UTF-8 JSON header ``{"dtype": "<f8", "tensors": [{"name", "shape"}, ...]}``;
    then every tensor's values, row-major little-endian float64, in header order.
    """
    names = sorted(params)
    header = json.dumps(
        {"dtype": "<f8", "tensors": [{"name": n, "shape": list(np.shape(params[n]))} for n in names]},
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:8] != PARAMS_MAGIC or len(data) < 12:
        raise FormatError(f"{path}: not a parameter file")
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
        tensors = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise FormatError(f"{path}: bad parameter header") from exc
    if header.get("dtype") != "<f8":
        raise FormatError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    out, pos = {}, 12 + hlen
    for entry in tensors:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape, dtype=np.int64)) * 8
        if pos + n > len(data):
            raise FormatError(f"{path}: truncated at tensor {entry['name']!r}")
        out[entry["name"]] = np.frombuffer(data[pos : pos + n], dtype="<f8").reshape(shape).astype(np.float64)
        pos += n
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return out
