"""Backend interface, request types and verdict parsing."""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, TypeVar

from ..errors import ConfigError, GridMismatch, UnparseableReply
from ..maskcore import BinaryMask, LabelMap, RgbImage, TriZoneMask, same_grid

T = TypeVar("T")


class MaskKind(str, enum.Enum):
    BINARY = "binary"
    TRIZONE = "trizone"
    NONE = "none"


@dataclass(frozen=True)
class TryOnRequest:
    model_image: RgbImage
    garment_image: RgbImage
    mask: BinaryMask | TriZoneMask | None = None
    mask_kind: MaskKind = MaskKind.NONE

    def __post_init__(self) -> None:
        object.__setattr__(self, "mask_kind", MaskKind(self.mask_kind))
        expected = {MaskKind.BINARY: BinaryMask, MaskKind.TRIZONE: TriZoneMask}.get(self.mask_kind)
        if expected is None:
            if self.mask is not None:
                raise ValueError("mask given with mask_kind 'none'")
        elif not isinstance(self.mask, expected):
            raise ValueError(f"mask_kind {self.mask_kind.value} needs a {expected.__name__}")
        rasters = [self.model_image, self.garment_image] + ([self.mask] if self.mask is not None else [])
        same_grid(*rasters)


class Verdict(str, enum.Enum):
    REASONABLE = "reasonable"
    UNREASONABLE = "unreasonable"


@dataclass(frozen=True)
class JudgeVerdict:
    verdict: Verdict
    raw_reply: str


def parse_verdict(reply: str) -> JudgeVerdict:
    """Reasonable iff the reply mentions "reasonable" and never "unreasonable"."""
    text = reply.strip().lower()
    if "unreasonable" in text:
        return JudgeVerdict(Verdict.UNREASONABLE, reply)
    if "reasonable" in text:
        return JudgeVerdict(Verdict.REASONABLE, reply)
    raise UnparseableReply(f"judge reply has no verdict: {reply[:80]!r}")


@dataclass(frozen=True)
class BackendEndpoint:
    base_url: str
    timeout: float = 30.0
    retry_limit: int = 2
    auth_token: str | None = None
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ConfigError("endpoint timeout must be > 0")
        if self.retry_limit < 0:
            raise ConfigError("endpoint retry_limit must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("endpoint max_in_flight must be >= 1")


@dataclass(frozen=True)
class Provenance:
    kind: str  # "mock" or "remote"
    endpoint: str
    capability: str
    latency_s: float
    attempts: int = 1


class Backend:
    """A model server reachable for some subset of capabilities.

    Every method takes an optional ``key`` used as an idempotency key by
    remote clients. When set, ``on_result`` receives a :class:`Provenance`
    for every successful call.
    """

    kind = "abstract"
    endpoint = ""

    def __init__(self) -> None:
        self.on_result: Callable[[Provenance], None] | None = None

    def _timed(self, capability: str, fn: Callable[[], T], attempts: Callable[[], int] = lambda: 1) -> T:
        start = time.perf_counter()
        out = fn()
        if self.on_result is not None:
            self.on_result(Provenance(self.kind, self.endpoint, capability, time.perf_counter() - start, attempts()))
        return out

    def tryon(self, req: TryOnRequest, key: str | None = None) -> RgbImage:
        raise NotImplementedError

    def inpaint(self, image: RgbImage, region: BinaryMask, key: str | None = None) -> RgbImage:
        raise NotImplementedError

    def parse_human(self, image: RgbImage, key: str | None = None) -> LabelMap:
        raise NotImplementedError

    def densepose(self, image: RgbImage, key: str | None = None) -> LabelMap:
        raise NotImplementedError

    def predict_trizone(self, model_image: RgbImage, garment_image: RgbImage, key: str | None = None) -> TriZoneMask:
        raise NotImplementedError

    def judge(self, triptych: RgbImage, prompt: str, key: str | None = None) -> JudgeVerdict:
        raise NotImplementedError


def check_inpaint_args(image: RgbImage, region: BinaryMask) -> None:
    if image.grid != region.grid:
        raise GridMismatch(f"inpaint region {region.grid} does not match image {image.grid}")


def check_prompt(prompt: str) -> None:
    if not prompt.strip():
        raise ValueError("judge prompt must be non-empty")


@dataclass
class Capabilities:
    """Which backend serves each pipeline capability.

    ``idm`` is the off-the-shelf binary-mask try-on model of round 1;
    ``crossvton`` and ``trizone`` are the round-1-trained models that round 2
    consumes, and ``round1_trained`` records which names have been declared
    trained in the configuration.
    """

    idm: Backend | None = None
    inpaint: Backend | None = None
    parse: Backend | None = None
    densepose: Backend | None = None
    trizone: Backend | None = None
    crossvton: Backend | None = None
    judge: Backend | None = None
    round1_trained: frozenset[str] = field(default_factory=frozenset)

    def require(self, name: str) -> Backend:
        backend = getattr(self, name)
        if backend is None:
            raise ConfigError(f"no backend configured for {name!r}")
        return backend
