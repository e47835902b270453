"""
Exception hierarchy shared by every relzk module.
The CLI maps each family onto a documented exit status.
"""

from typing import Optional


class RelzkError(Exception):
    """Base class for all relzk failures"""

    exit_code = 1


class ContractViolation(RelzkError, ValueError):
    """A precondition of an operation was not met"""

    exit_code = 3


class InvalidEdgeError(ContractViolation):
    """An edge is not part of the graph it was used with"""


class FrameError(ContractViolation):
    """A wire frame could not be decoded"""


class SizeLimitError(RelzkError):
    """An exhaustive oracle or enumeration would exceed its configured bound"""

    exit_code = 3


class GraphFormatError(RelzkError):
    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedTranscriptError(RelzkError):
    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SharedRandomnessFormatError(RelzkError):
    exit_code = 3


class ConfigurationError(RelzkError):
    exit_code = 3


class UnknownProfileError(ConfigurationError):
    pass


class AuditViolationError(RelzkError):
    """The no-signalling audit found rounds outside the light cone"""

    exit_code = 4


class ConstructionError(RelzkError):
    """Node-sequence construction gave up; carries the attempted parameters"""

    exit_code = 6

    def __init__(self, message: str, **params):
        self.params = params
        if params:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(params.items()))
            message = f"{message} ({detail})"
        super().__init__(message)


class ColouringTrackingError(RelzkError):
    """A generated certificate failed validation; it is never emitted"""

    exit_code = 6


class ProtocolAbort(RelzkError):
    exit_code = 7

    def __init__(self, message: str, round_index: int):
        self.round_index = round_index
        super().__init__(f"round {round_index}: {message}")
