"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class Scan2SimError(Exception):
    """Base class for all package errors."""


# -- ingestion -----------------------------------------------------------------


class ParseError(Scan2SimError):
    """A mesh or annotation file could not be read."""


class SchemaError(Scan2SimError):
    """An annotation document violates the v1 schema or a scene invariant."""


class DanglingReferenceError(Scan2SimError):
    """An annotation cites a face, node or part that does not exist."""


class UnknownIdError(Scan2SimError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class EmptyNodeError(Scan2SimError):
    """The node owns no faces, so it has no geometry to measure."""


# -- USD text ------------------------------------------------------------------


class UsdaError(Scan2SimError):
    pass


class UsdaSyntaxError(UsdaError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class LexError(UsdaSyntaxError):
    pass


class UnsupportedConstruct(UsdaError):
    def __init__(self, construct: str, line: int | None = None):
        where = f" at line {line}" if line is not None else ""
        super().__init__(f"unsupported USDA construct {construct!r}{where}")
        self.construct = construct
        self.line = line


class UnknownPath(UsdaError):
    pass


class PrimExists(UsdaError):
    pass


class TypeMismatch(UsdaError):
    pass


# -- geometry ------------------------------------------------------------------


class DegenerateInput(Scan2SimError):
    pass


class NoPlaneFound(Scan2SimError):
    pass


class DegenerateSurface(Scan2SimError):
    pass


# -- language model ------------------------------------------------------------


class BackendError(Scan2SimError):
    """Transport-level failure talking to the model."""


class InvalidAnswer(Scan2SimError):
    """The model answer could not be parsed or named something not in the scene."""


# -- pipelines -----------------------------------------------------------------


class PlacementExhausted(Scan2SimError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class StageError(Scan2SimError):
    """Wraps a failure inside the insertion pipeline with the stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class NoGraspRegion(Scan2SimError):
    pass


class NoArticulation(Scan2SimError):
    pass
