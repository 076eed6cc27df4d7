"""Exception hierarchy shared by every module."""

from __future__ import annotations


class TrizoneError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UnknownClass(TrizoneError, KeyError):
    exit_code = 3

    def __str__(self) -> str:
        return Exception.__str__(self)


class UnknownPart(UnknownClass):
    pass


class GridMismatch(TrizoneError, ValueError):
    exit_code = 4


class ShapeMismatch(GridMismatch):
    pass


class OverlapError(TrizoneError, ValueError):
    exit_code = 5


class EmptyMask(TrizoneError, ValueError):
    exit_code = 6


class FormatError(TrizoneError, ValueError):
    """A file or payload does not follow its documented format."""

    exit_code = 10


class ConfigError(TrizoneError, ValueError):
    exit_code = 2


class RoutingError(TrizoneError, ValueError):
    """A job was submitted to a constructor that cannot serve its route."""

    exit_code = 7


class StageGatingError(TrizoneError):
    """Round-2 work requested without a round-1-trained backend."""

    exit_code = 7


class BackendError(TrizoneError):
    exit_code = 8
    kind = "RemoteFailure"


class BackendTimeout(BackendError):
    kind = "Timeout"


class ProtocolError(BackendError):
    kind = "Protocol"


class RemoteFailure(BackendError):
    kind = "RemoteFailure"


class UnparseableReply(BackendError):
    kind = "UnparseableReply"


class EmptyDataset(TrizoneError, ValueError):
    exit_code = 9


class DivergenceError(TrizoneError, FloatingPointError):
    exit_code = 9
