"""Executable-ontology engine.

BSL model definitions load as template events; business activity lands as
an append-only, hash-chained event graph; logic runs as event-based
dataflow, with properties firing automatically when their declared
conditions become true.
"""

from .clock import FixedClock, SystemClock
from .dump import dumps, events_to_records, import_dump, loads_records, verify_records
from .engine import CommitResult, Engine, ScriptResult
from .errors import (
    BslError,
    CascadeLimitExceeded,
    ConditionFalse,
    DumpFormatError,
    EvalError,
    ExpectationFailed,
    GraphError,
    IntegrityError,
    MissingValue,
    ParseError,
    PermissionDenied,
    ValidationError,
    ValueConditionFailed,
)
from .evaluator import EvalContext, current_value, dependencies, eval_expr, run_query
from .graph import SYSTEM_ACTOR, Event, EventGraph, hash_event
from .parser import parse_expression, parse_model, parse_source
from .printer import print_bsl, print_document, print_expression
from .values import UNDEFINED, Ref, Undefined

__version__ = "0.1.0"

__all__ = [
    "BslError",
    "CascadeLimitExceeded",
    "CommitResult",
    "ConditionFalse",
    "DumpFormatError",
    "Engine",
    "EvalContext",
    "EvalError",
    "Event",
    "EventGraph",
    "ExpectationFailed",
    "FixedClock",
    "GraphError",
    "IntegrityError",
    "MissingValue",
    "ParseError",
    "PermissionDenied",
    "Ref",
    "SYSTEM_ACTOR",
    "ScriptResult",
    "SystemClock",
    "UNDEFINED",
    "Undefined",
    "ValidationError",
    "ValueConditionFailed",
    "current_value",
    "dependencies",
    "dumps",
    "eval_expr",
    "events_to_records",
    "hash_event",
    "import_dump",
    "loads_records",
    "parse_expression",
    "parse_model",
    "parse_source",
    "print_bsl",
    "print_document",
    "print_expression",
    "run_query",
    "verify_records",
    "__version__",
]
