"""Runtime values shared by the graph, the evaluator and the engine.

A value is one of: text (str), integer (int), decimal (float), boolean
(bool), instant (timezone-aware datetime), a reference to an event id
(Ref), a list of values, or the first-class UNDEFINED marker.

UNDEFINED is deliberately distinct from False and from "" so that
conditions can tell "property absent" apart from "property falsy".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Union

EVENT_ID_RE = re.compile(r"^#[0-9a-f]{40}$")

# ISO-8601 UTC with exactly millisecond precision, e.g. 2024-10-23T10:59:29.478Z
_INSTANT_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")


class Undefined:
    """Singleton marker for an absent value."""

    _instance: "Undefined | None" = None

    def __new__(cls) -> "Undefined":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undefined"

    def __bool__(self) -> bool:
        return False


UNDEFINED = Undefined()


@dataclass(frozen=True)
class Ref:
    """Reference value: the event id of an individual or actor."""

    id: str

    def __post_init__(self) -> None:
        if not EVENT_ID_RE.match(self.id):
            raise ValueError(f"malformed event id reference: {self.id!r}")

    def __repr__(self) -> str:
        return f"Ref({self.id})"


Value = Union[str, int, float, bool, datetime, Ref, list, Undefined]


def is_number(value: Value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def format_instant(dt: datetime) -> str:
    """ISO-8601 UTC string with millisecond precision and Z suffix."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_instant(text: str) -> datetime:
    if not _INSTANT_RE.match(text):
        raise ValueError(f"not a millisecond-precision UTC instant: {text!r}")
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


def canonical_text(value: Value) -> str:
    """Deterministic textual form of a value, used in the canonical hash string."""
    if isinstance(value, Undefined):
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, datetime):
        return format_instant(value)
    if isinstance(value, Ref):
        return value.id
    if isinstance(value, list):
        return "[" + ",".join(canonical_text(v) for v in value) + "]"
    raise TypeError(f"not a value: {value!r}")


def value_to_json(value: Value):
    """Map a runtime value onto the JSON shape used by dumps and the API."""
    if isinstance(value, Undefined):
        return None
    if isinstance(value, (bool, str, int, float)):
        return value
    if isinstance(value, datetime):
        return format_instant(value)
    if isinstance(value, Ref):
        return value.id
    if isinstance(value, list):
        return [value_to_json(v) for v in value]
    raise TypeError(f"not a value: {value!r}")


def value_from_json(raw) -> Value:
    """Inverse of value_to_json.

    Strings matching the event-id pattern come back as Ref, strings in the
    exact millisecond-UTC instant form come back as datetime; everything
    else keeps its JSON-native type. Both special forms canonicalize to
    the same text they were exported as, so hashes recompute identically.
    """
    if raw is None:
        return UNDEFINED
    if isinstance(raw, bool):
        return raw
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, str):
        if EVENT_ID_RE.match(raw):
            return Ref(raw)
        if _INSTANT_RE.match(raw):
            return parse_instant(raw)
        return raw
    if isinstance(raw, list):
        return [value_from_json(v) for v in raw]
    raise TypeError(f"not a dump value: {raw!r}")
