"""Interfaces to the learned models the construction pipeline drives."""

from .base import (
    Backend,
    BackendEndpoint,
    Capabilities,
    JudgeVerdict,
    MaskKind,
    Provenance,
    TryOnRequest,
    Verdict,
    parse_verdict,
)
from .http import HttpBackend
from .mockworld import MockBackend, ScriptedJudge

__all__ = [
    "Backend",
    "BackendEndpoint",
    "Capabilities",
    "HttpBackend",
    "JudgeVerdict",
    "MaskKind",
    "MockBackend",
    "Provenance",
    "ScriptedJudge",
    "TryOnRequest",
    "Verdict",
    "parse_verdict",
]
