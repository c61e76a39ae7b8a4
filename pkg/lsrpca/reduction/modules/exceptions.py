"""
Exception hierarchy for the reduction toolkit.

Every error raised on purpose by the toolkit derives from ``LsrpcaError`` and
carries an ``exit_code`` that the management commands hand back to the shell.
"""


class LsrpcaError(Exception):
    """Base class for toolkit errors."""

    exit_code = 1


class ConfigError(LsrpcaError):
    """Raised when a pipeline config or command option is invalid."""

    exit_code = 2


class PreconditionError(LsrpcaError):
    """Raised when an algorithm precondition is violated."""

    exit_code = 3


class FirstSliceTooShortError(PreconditionError):
    """Raised when the first slice has fewer rows than the oversampled dimension."""

    def __init__(self, first_rows: int, kbar: int):
        self.first_rows = first_rows
        self.kbar = kbar
        super().__init__(
            f"First slice has {first_rows} rows but K̄={kbar}; the first slice must "
            f"hold at least K̄ rows. Re-partition the store with more rows per slice "
            f"or lower K̄.",
        )


class ShapeError(LsrpcaError):
    """Raised when operand shapes do not agree."""

    exit_code = 4

    def __init__(self, message: str, *shapes: tuple[int, ...]):
        self.shapes = shapes
        if shapes:
            message = f"{message} (shapes: {', '.join(str(s) for s in shapes)})"
        super().__init__(message)


class RankDeficiencyError(LsrpcaError):
    """Raised when a triangular factor is numerically singular."""

    exit_code = 5

    def __init__(self, numerical_rank: int, size: int, kbar: int | None = None):
        self.numerical_rank = numerical_rank
        self.size = size
        self.kbar = kbar
        advice = f"use a K̄ of at most {numerical_rank}" if numerical_rank else "check the input is not all zero"
        label = f"K̄={kbar}" if kbar is not None else f"size {size}"
        super().__init__(
            f"Triangular factor is rank deficient: numerical rank {numerical_rank} "
            f"of {size} ({label}); {advice}.",
        )


class StorageError(LsrpcaError):
    """Raised when a slice store cannot be written or read."""

    exit_code = 6


class CorruptSliceError(StorageError):
    """Raised when a slice fails checksum or header validation."""

    def __init__(self, slice_index: int, reason: str):
        self.slice_index = slice_index
        super().__init__(f"Slice {slice_index} is corrupt: {reason}")


class SliceNotFoundError(StorageError):
    """Raised when a store manifest or slice file is missing."""


class MatrixParseError(LsrpcaError):
    """Raised when an input matrix file is malformed."""

    exit_code = 7

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")


class LabelError(LsrpcaError):
    """Raised when labels do not match their features or miss a class."""

    exit_code = 8
