"""Exception hierarchy. ``IoFailure`` and ``ConfigError`` subclasses map to CLI exit codes 2 and 3."""


class DpmotError(Exception):
    pass


class IoFailure(DpmotError):
    pass


class ConfigError(DpmotError):
    pass


class ParseError(IoFailure):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class EmptyFile(IoFailure):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"{self.path}: file is empty")


class MissingField(IoFailure):
    def __init__(self, field, path=None):
        self.field = field
        self.path = None if path is None else str(path)
        where = f"{self.path}: " if self.path else ""
        super().__init__(f"{where}missing field {field!r}")


class BadMagic(IoFailure):
    pass


class TruncatedFile(IoFailure):
    def __init__(self, path, offset, reason="unexpected end of file"):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path}: {reason} at byte offset {offset}")


class DimMismatch(IoFailure):
    pass


class EmptyGroundTruth(DpmotError):
    pass


class MismatchedIndexSets(DpmotError):
    def __init__(self, message, frame=None):
        self.frame = frame
        if frame is not None:
            message = f"frame {frame}: {message}"
        super().__init__(message)


class InvalidFrameOrder(DpmotError):
    pass


class BehindCamera(DpmotError):
    pass


class DegenerateGeometry(DpmotError):
    pass


class NonFiniteState(DpmotError):
    pass


class SingularInnovation(DpmotError):
    pass


class ZeroVector(DpmotError):
    pass


class UnsortedInput(DpmotError):
    pass
