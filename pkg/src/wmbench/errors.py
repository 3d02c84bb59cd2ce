"""Exception hierarchy shared by every wmbench module."""


class WmbenchError(Exception):
    """Base class for all errors raised by wmbench."""


# audio I/O and signal containers
class UnsupportedFormat(WmbenchError):
    pass


class CorruptHeader(WmbenchError):
    pass


class IoFailure(WmbenchError):
    pass


class EmptyInput(WmbenchError, ValueError):
    pass


class InconsistentShape(WmbenchError, ValueError):
    pass


# conditions
class SkippedCondition(WmbenchError):
    """A condition cannot run because a corpus or tool binding is absent."""


class SilentCarrier(WmbenchError, ValueError):
    pass


class SilentImpulse(WmbenchError, ValueError):
    pass


class TooShort(WmbenchError, ValueError):
    pass


class RangeViolation(WmbenchError, ValueError):
    pass


class ToolFailure(WmbenchError):
    pass


class MalformedToolOutput(WmbenchError):
    pass


# watermarking and scoring
class WatermarkLowEnergy(WmbenchError, ValueError):
    pass


class LengthMismatch(WmbenchError, ValueError):
    pass


class MissingScore(WmbenchError, KeyError):
    pass


class AdapterFailure(WmbenchError):
    pass


class ParseFailure(WmbenchError, ValueError):
    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


# metrics / protocol / harness
class OneClassOnly(WmbenchError, ValueError):
    pass


class DuplicateUtterance(WmbenchError, ValueError):
    pass


class MissingAudio(WmbenchError, FileNotFoundError):
    pass


class ConfigInvalid(WmbenchError, ValueError):
    pass
