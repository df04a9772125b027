from typing import Optional


class GraphMarketError(Exception):
    """Base error; `exit_code` is what the CLI returns for it."""

    exit_code = 2


class DataIOError(GraphMarketError):
    exit_code = 1

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ValidationError(GraphMarketError):
    exit_code = 2


class GraphFormatError(ValidationError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(location + message)


class GraphInvariantError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class PhaseError(ValidationError):
    """Raised when a protocol message arrives out of order."""


class VerificationError(GraphMarketError):
    exit_code = 3
