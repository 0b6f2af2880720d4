"""Error hierarchy.

Every rejection carries a stable machine-readable ``code`` so callers (CLI,
HTTP facade, tests) can branch on the reason without parsing prose.
"""

from __future__ import annotations


class BslError(Exception):
    """Base class for all engine errors."""

    code = "Error"

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.code)
        self.message = message or self.code


class ParseError(BslError):
    code = "ParseError"

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line:
            return f"line {self.line}: {self.message}"
        return self.message


class NestingError(ParseError):
    """Source text nests deeper than the five-level limit."""

    code = "NestingViolation"


class EvalError(BslError):
    code = "EvalError"


class MissingValue(EvalError):
    """Strict access met an absent intermediate value."""

    code = "MissingValue"


class TypeMismatch(EvalError):
    code = "TypeMismatch"


class DivisionByZero(EvalError):
    code = "DivisionByZero"


class NotAReference(EvalError):
    code = "NotAReference"


class IndexOutOfRange(EvalError):
    code = "IndexOutOfRange"


class ValidationError(BslError):
    """A submitted event was rejected; nothing was committed."""

    code = "ValidationError"


class ParentMissing(ValidationError):
    code = "ParentMissing"


class ConditionFalse(ValidationError):
    code = "ConditionFalse"


class PermissionDenied(ValidationError):
    code = "PermissionDenied"


class ValueConditionFailed(ValidationError):
    code = "ValueConditionFailed"


class RangeViolation(ValidationError):
    code = "RangeViolation"


class MultiplicityViolation(ValidationError):
    code = "MultiplicityViolation"


class ImmutableViolation(ValidationError):
    code = "ImmutableViolation"


class UniqueViolation(ValidationError):
    code = "UniqueViolation"


class DuplicateIdentifier(ValidationError):
    code = "DuplicateIdentifier"


class RequiredMissing(ValidationError):
    code = "RequiredMissing"


class DataTypeMismatch(ValidationError):
    code = "DataTypeMismatch"


class NotInModel(ValidationError):
    code = "NotInModel"


class NestingViolation(ValidationError):
    code = "NestingViolation"


class UnknownActor(ValidationError):
    code = "UnknownActor"


class UnknownIndividual(ValidationError):
    code = "UnknownIndividual"


class UnknownModel(ValidationError):
    code = "UnknownModel"


class CascadeLimitExceeded(ValidationError):
    """A dataflow cascade failed to reach a fixed point within the step cap."""

    code = "CascadeLimitExceeded"


class ExpectationFailed(ValidationError):
    """A script asserted a computed value the engine did not produce."""

    code = "ExpectationFailed"


class GraphError(BslError):
    code = "GraphError"


class IntegrityError(GraphError):
    """A dump failed hash-chain verification."""

    code = "IntegrityError"


class DumpFormatError(GraphError):
    code = "DumpFormatError"
