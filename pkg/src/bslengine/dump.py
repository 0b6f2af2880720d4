"""Dump format: the whole graph as a JSON array of event records.

Record keys, in order: id, base, type, value, actor, model, cause, date.
cause is a plain string when the event has exactly one cause, an array
otherwise. Dates are millisecond-precision UTC instants. The format
round-trips exactly, so an exported dump re-imports to the same hashes.
"""

from __future__ import annotations

import json
from typing import Iterable

from .errors import DumpFormatError, IntegrityError
from .graph import Event, EventGraph, VerificationReport, Violation, hash_event
from .values import format_instant, parse_instant, value_from_json, value_to_json

RECORD_KEYS = ("id", "base", "type", "value", "actor", "model", "cause", "date")


def event_to_record(event: Event) -> dict:
    cause: object
    if len(event.cause) == 1:
        cause = event.cause[0]
    else:
        cause = list(event.cause)
    return {
        "id": event.id,
        "base": event.base,
        "type": event.type,
        "value": value_to_json(event.value),
        "actor": event.actor,
        "model": event.model,
        "cause": cause,
        "date": format_instant(event.timestamp),
    }


def events_to_records(events: Iterable[Event]) -> list[dict]:
    return [event_to_record(e) for e in events]


def dumps(events: Iterable[Event]) -> str:
    return json.dumps(events_to_records(events), indent=2, ensure_ascii=False) + "\n"


def loads_records(text: str) -> list[dict]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DumpFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise DumpFormatError("dump must be a JSON array of event records")
    return raw


def _record_fields(record: dict):
    """Extract and type-check one record; raises DumpFormatError."""
    if not isinstance(record, dict):
        raise DumpFormatError(f"record is not an object: {record!r}")
    missing = [k for k in RECORD_KEYS if k not in record]
    if missing:
        raise DumpFormatError(f"record missing keys: {', '.join(missing)}")
    extra = [k for k in record if k not in RECORD_KEYS]
    if extra:
        raise DumpFormatError(f"record has unknown keys: {', '.join(extra)}")
    for key in ("id", "base", "type", "actor", "model", "date"):
        if not isinstance(record[key], str):
            raise DumpFormatError(f"record field {key} must be a string")
    raw_cause = record["cause"]
    if isinstance(raw_cause, str):
        cause = (raw_cause,) if raw_cause else ()
    elif isinstance(raw_cause, list) and all(isinstance(c, str) for c in raw_cause):
        cause = tuple(raw_cause)
    else:
        raise DumpFormatError("record field cause must be a string or array of strings")
    try:
        timestamp = parse_instant(record["date"])
    except ValueError as exc:
        raise DumpFormatError(str(exc)) from None
    value = value_from_json(record["value"])
    return record["id"], record["base"], record["type"], value, record["actor"], record[
        "model"
    ], cause, timestamp


def verify_records(records: list[dict]) -> VerificationReport:
    """Recompute every id and check the reference structure.

    Any event whose own record is corrupt, plus everything reachable from
    it through base or cause references, lands in the tainted set.
    """
    violations: list[Violation] = []
    bad_ids: set[str] = set()
    seen: dict[str, int] = {}

    def flag(seq: int, event_id: str, code: str, detail: str) -> None:
        violations.append(Violation(seq=seq, event_id=event_id, code=code, detail=detail))
        if event_id:
            bad_ids.add(event_id)

    parsed: list[tuple | None] = []
    for seq, record in enumerate(records):
        try:
            fields = _record_fields(record)
        except DumpFormatError as exc:
            rid = record.get("id", "") if isinstance(record, dict) else ""
            flag(seq, rid if isinstance(rid, str) else "", "malformed-record", exc.message)
            parsed.append(None)
            continue
        parsed.append(fields)
        event_id, base, type, value, actor, model, cause, timestamp = fields
        recomputed = hash_event(base, type, value, actor, model, cause, timestamp)
        if recomputed != event_id:
            flag(seq, event_id, "id-mismatch", f"content hashes to {recomputed}")
        if event_id in seen:
            flag(seq, event_id, "duplicate-id", f"also at position {seen[event_id]}")
        else:
            seen[event_id] = seq
        if seq == 0:
            if base != "":
                flag(seq, event_id, "root", "first event must have an empty base")
        else:
            if base == "":
                flag(seq, event_id, "root", "only the first event may have an empty base")
            elif base not in seen or seen[base] >= seq:
                flag(seq, event_id, "unknown-base", f"base {base} not among earlier events")
            for c in cause:
                if c not in seen or seen[c] >= seq:
                    flag(seq, event_id, "unknown-cause", f"cause {c} not among earlier events")

    # Taint propagation: one forward pass suffices because references only
    # point backwards in the log.
    tainted = set(bad_ids)
    for seq, fields in enumerate(parsed):
        if fields is None:
            continue
        event_id, base, _, _, _, _, cause, _ = fields
        if event_id in tainted:
            continue
        if base in tainted or any(c in tainted for c in cause):
            tainted.add(event_id)

    return VerificationReport(
        valid=not violations, violations=violations, tainted=frozenset(tainted)
    )


def import_records(records: list[dict], clock) -> EventGraph:
    """Build a graph from verified records; rejects on any violation."""
    report = verify_records(records)
    if not report.valid:
        first = report.first_divergence
        raise IntegrityError(
            f"dump failed verification at position {first.seq}"
            f" ({first.code}): {first.detail}"
        )
    graph = EventGraph(clock, create_root=False)
    for record in records:
        event_id, base, type, value, actor, model, cause, timestamp = _record_fields(record)
        graph.append_imported(
            id=event_id,
            base=base,
            type=type,
            value=value,
            actor=actor,
            model=model,
            cause=cause,
            timestamp=timestamp,
        )
    return graph


def import_dump(text: str, clock) -> EventGraph:
    return import_records(loads_records(text), clock)
