"""Exception hierarchy shared by every opbench module."""

from __future__ import annotations


class OpBenchError(Exception):
    """Base class for all harness errors."""


# core model
class TypeMismatch(OpBenchError):
    pass


class MissingField(OpBenchError):
    pass


class NonRecordValue(OpBenchError):
    pass


class InvalidValue(OpBenchError):
    """A value violates a construction invariant (bad key, NaN, duplicate field...)."""


class DuplicateKey(InvalidValue):
    pass


class ElementTooLarge(OpBenchError):
    pass


# transforms
class UnknownTransform(OpBenchError):
    pass


class ParamSchemaViolation(OpBenchError):
    pass


class InputKindMismatch(OpBenchError):
    pass


# engine
class EmptySet(OpBenchError):
    pass


class BlowupCapExceeded(OpBenchError):
    pass


class PipelineTypeError(OpBenchError):
    pass


class ElementNotFound(OpBenchError):
    """A step received the not-found result of a keyed get."""


class GuardTripped(OpBenchError):
    """The iteration guard fired before the stopping condition held.

    ``result`` holds the last completed iteration's set.
    """

    def __init__(self, message: str, result=None, iterations: int = 0, final_delta=None):
        super().__init__(message)
        self.result = result
        self.iterations = iterations
        self.final_delta = final_delta


# backend
class SetNotFound(OpBenchError):
    pass


class SetAlreadyExists(OpBenchError):
    pass


class SnapshotIOError(OpBenchError):
    pass


class CorruptSnapshot(OpBenchError):
    pass


# datagen
class InvalidSpec(OpBenchError):
    pass


class EdgeSpaceExhausted(InvalidSpec):
    pass


# driver
class WorkloadSetupError(OpBenchError):
    pass


class EmptyRecorder(OpBenchError):
    pass


# prescriptions
class PrescriptionError(OpBenchError):
    """Base for prescription problems; ``path`` locates the offending node."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class PrescriptionSyntaxError(PrescriptionError):
    pass


class SchemaError(PrescriptionError):
    pass


class UndeclaredOperation(PrescriptionError):
    pass


class UndeclaredPattern(PrescriptionError):
    pass


class RunError(OpBenchError):
    """A prescription run failed; ``phase`` is one of datagen, load, run, report."""

    def __init__(self, phase: str, cause: BaseException):
        super().__init__(f"[{phase}] {type(cause).__name__}: {cause}")
        self.phase = phase
        self.cause = cause
