"""Exception types shared across the package."""


class SigvqError(Exception):
    """Base class for package errors."""


class InvalidInputError(SigvqError, ValueError):
    """Raised when data handed to an operation violates its contract."""


class InvalidConfigError(SigvqError, ValueError):
    """Raised when a configuration value or combination is unusable."""


class ParseError(SigvqError, ValueError):
    """Raised on malformed signature, model, or manifest files.

    The message names the offending file and, where possible, the line.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc = f"{loc}line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line
