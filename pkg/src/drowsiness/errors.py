"""Exception hierarchy shared by every stage of the pipeline.

Each class carries a short ``kind`` string ("format error", "alignment error",
...) which is prefixed to the message, so log lines and CLI output stay
greppable regardless of which module raised.
"""


class DrowsinessError(Exception):
    kind = "error"
    exit_code = 1

    def __init__(self, message, *, context=None):
        self.detail = message
        self.context = context
        prefix = f"{context}: " if context else ""
        super().__init__(f"{prefix}{self.kind}: {message}")

    def with_context(self, context):
        """Return a copy of this error qualified by ``context``."""
        ctx = f"{context}/{self.context}" if self.context else context
        err = type(self)(self.detail, context=ctx)
        err.__cause__ = self
        return err


class FormatError(DrowsinessError):
    kind = "format error"
    exit_code = 3


class ValidationError(DrowsinessError):
    kind = "validation error"
    exit_code = 3


class AlignmentError(DrowsinessError):
    kind = "alignment error"
    exit_code = 3


class RecordingIOError(DrowsinessError):
    kind = "io error"
    exit_code = 3


class ParameterError(DrowsinessError):
    kind = "parameter error"
    exit_code = 2


class DegenerateInputError(DrowsinessError):
    kind = "degenerate input"
    exit_code = 4


class NumericalError(DrowsinessError):
    kind = "numerical error"
    exit_code = 4


class SchemeError(DrowsinessError):
    kind = "scheme error"
    exit_code = 3


class ConfigError(DrowsinessError):
    kind = "config error"
    exit_code = 2
