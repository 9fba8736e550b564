"""Error types shared by services and command handlers"""
from typing import Optional


class ErgodicError(Exception):
    """Base error carrying the process exit code and a readable detail message"""

    exit_code = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class DomainError(ErgodicError, ValueError):
    """Precondition violated: bad index, empty input, out-of-range parameter"""

    exit_code = 2


class SystemMismatchError(DomainError):
    """Point representation does not belong to the system it was used with"""


class ConfigError(ErgodicError):
    """Malformed configuration, unknown system kind or unusable output path"""

    exit_code = 2


class SamplerError(ErgodicError):
    """Sampler produced no usable evidence"""

    exit_code = 1
