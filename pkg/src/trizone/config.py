"""Run configuration: seeds, policies, thresholds and the backend table.

Config files are JSON. Endpoint settings can be overridden per backend with
``TRIZONE_<NAME>_URL``, ``TRIZONE_<NAME>_TOKEN`` and ``TRIZONE_<NAME>_TIMEOUT``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

from .backends import BackendEndpoint, Capabilities, HttpBackend, MockBackend
from .errors import ConfigError
from .maskadjust import DEFAULT_SHRINK_RANGE
from .zonealgebra import Precedence

BACKEND_NAMES = ("idm", "inpaint", "parse", "densepose", "trizone", "crossvton", "judge")
ROUND2_BACKENDS = ("trizone", "crossvton")


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "mock"  # "mock" or "http"
    base_url: str = ""
    timeout: float = 30.0
    retry_limit: int = 2
    auth_token: str | None = None
    max_in_flight: int = 4
    round1_trained: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http"):
            raise ConfigError(f"backend kind must be 'mock' or 'http', got {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ConfigError("http backends need a base_url")
        self.endpoint()  # validates timeout / retry_limit / max_in_flight

    def endpoint(self) -> BackendEndpoint:
        return BackendEndpoint(self.base_url or "mock://", self.timeout, self.retry_limit, self.auth_token, self.max_in_flight)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    failure_threshold: float = 0.10
    precedence: Precedence = Precedence.UNION_FIRST
    shrink_fraction_range: tuple[float, float] = DEFAULT_SHRINK_RANGE
    # DensePose part a stretched garment reaches, by the constructed garment's category.
    stretch_parts: Mapping[str, str] = field(
        default_factory=lambda: {"upper": "upper_leg", "dress": "lower_leg", "lower": "lower_leg"}
    )
    # DensePose parts a garment of each spec occupies; used to widen the
    # generation region when the constructed garment changes category.
    category_parts: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: {
            "upper/short": ("torso",),
            "upper/long": ("torso",),
            "dress/short": ("torso", "upper_leg"),
            "dress/long": ("torso", "upper_leg", "lower_leg"),
            "lower/short": ("upper_leg",),
            "lower/long": ("upper_leg", "lower_leg"),
        }
    )
    # Parsing-map class name of each garment category.
    garment_classes: Mapping[str, str] = field(
        default_factory=lambda: {"upper": "upper", "dress": "dress", "lower": "lower"}
    )
    # Dilation (pixels) of the parse-derived round-1 generation region.
    m2_margin: int = 0
    backends: Mapping[str, BackendSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "precedence", Precedence(self.precedence))
        lo, hi = self.shrink_fraction_range
        object.__setattr__(self, "shrink_fraction_range", (float(lo), float(hi)))
        object.__setattr__(self, "category_parts", {k: tuple(v) for k, v in dict(self.category_parts).items()})
        if not 0 < lo <= hi < 1:
            raise ConfigError(f"shrink_fraction_range must satisfy 0 < min <= max < 1, got {(lo, hi)}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.m2_margin < 0:
            raise ConfigError("m2_margin must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.failure_threshold <= 1:
            raise ConfigError("failure_threshold must be within [0, 1]")
        unknown = set(self.backends) - set(BACKEND_NAMES)
        if unknown:
            raise ConfigError(f"unknown backend names {sorted(unknown)}; expected {BACKEND_NAMES}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["precedence"] = self.precedence.value
        out["shrink_fraction_range"] = list(self.shrink_fraction_range)
        out["category_parts"] = {k: list(v) for k, v in self.category_parts.items()}
        out["backends"] = {name: asdict(spec) for name, spec in sorted(self.backends.items())}
        return out

    def fingerprint(self) -> str:
        """Hash of everything that can change construction output.

        Worker count and secrets are excluded.
        """
        data = self.to_dict()
        data.pop("workers")
        for spec in data["backends"].values():
            spec.pop("auth_token", None)
            spec.pop("max_in_flight", None)
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        data = dict(data)
        try:
            backends = {name: BackendSpec(**spec) for name, spec in dict(data.pop("backends", {})).items()}
            return cls(backends=backends, **data)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def mock_backends(seed: int = 0, round1_trained: bool = True) -> dict[str, BackendSpec]:
    return {
        name: BackendSpec(kind="mock", seed=seed, round1_trained=round1_trained and name in ROUND2_BACKENDS)
        for name in BACKEND_NAMES
    }


def mock_config(seed: int = 0, **overrides) -> RunConfig:
    return RunConfig(seed=seed, backends=mock_backends(), **overrides)


def apply_env(config: RunConfig, environ: Mapping[str, str] | None = None) -> RunConfig:
    environ = os.environ if environ is None else environ
    backends = dict(config.backends)
    for name in BACKEND_NAMES:
        prefix = f"TRIZONE_{name.upper()}_"
        changes: dict = {}
        if prefix + "URL" in environ:
            changes.update(kind="http", base_url=environ[prefix + "URL"])
        if prefix + "TOKEN" in environ:
            changes["auth_token"] = environ[prefix + "TOKEN"]
        if prefix + "TIMEOUT" in environ:
            try:
                changes["timeout"] = float(environ[prefix + "TIMEOUT"])
            except ValueError:
                raise ConfigError(f"{prefix}TIMEOUT must be a number") from None
        if not changes:
            continue
        if name in backends:
            backends[name] = replace(backends[name], **changes)
        elif "base_url" in changes:
            backends[name] = BackendSpec(**changes)
        else:
            raise ConfigError(f"{prefix}TOKEN/TIMEOUT set but backend {name!r} has no URL")
    return replace(config, backends=backends)


def load_config(path: str | Path | None, environ: Mapping[str, str] | None = None) -> RunConfig:
    if path is None:
        return apply_env(RunConfig(), environ)
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return apply_env(RunConfig.from_dict(data), environ)


def build_capabilities(config: RunConfig) -> Capabilities:
    built = {}
    for name, spec in config.backends.items():
        if spec.kind == "mock":
            built[name] = MockBackend(name, spec.seed)
        else:
            built[name] = HttpBackend(spec.endpoint())
    trained = frozenset(name for name, spec in config.backends.items() if spec.round1_trained)
    return Capabilities(round1_trained=trained, **built)
