"""Append-only temporal event graph with content-addressed event ids.

Every event records who did what to which node, under which model, caused
by which prior events, at what instant. The id is a truncated sha256 of
the event's own fields, so any retroactive edit breaks the id of the
edited event and, through base/cause references, everything downstream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional

from .errors import GraphError
from .values import Value, canonical_text, format_instant

SYSTEM_ACTOR = "#" + "0" * 40

ROOT_TYPE = "Root"


def hash_event(
    base: str,
    type: str,
    value: Value,
    actor: str,
    model: str,
    cause: Iterable[str],
    timestamp: datetime,
) -> str:
    """Content hash of an event: '#' + first 40 hex chars of sha256.

    The canonical string joins the fields with '|' (causes joined by ','),
    timestamps rendered as millisecond-precision UTC instants.
    """
    canonical = "|".join(
        [
            base,
            type,
            canonical_text(value),
            actor,
            model,
            ",".join(cause),
            format_instant(timestamp),
        ]
    )
    return "#" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:40]


@dataclass(frozen=True)
class Event:
    """One immutable node of the graph.

    seq is the event's position in total order (0 for the root); it is not
    part of the hash, it is implied by position in the log.
    """

    id: str
    base: str
    type: str
    value: Value
    actor: str
    cause: tuple[str, ...]
    model: str
    timestamp: datetime
    seq: int

    @property
    def type_lower(self) -> str:
        return self.type.lower()


@dataclass
class Violation:
    seq: int
    event_id: str
    code: str
    detail: str


@dataclass
class VerificationReport:
    valid: bool
    violations: list[Violation] = field(default_factory=list)
    tainted: frozenset[str] = frozenset()

    @property
    def first_divergence(self) -> Optional[Violation]:
        return self.violations[0] if self.violations else None


class EventGraph:
    """Ordered, append-only store of events with lookup indexes."""

    def __init__(self, clock, create_root: bool = True) -> None:
        self.clock = clock
        self.events: list[Event] = []
        self._by_id: dict[str, Event] = {}
        self._children: dict[str, list[Event]] = {}
        self._by_type_lower: dict[str, list[Event]] = {}
        if create_root:
            self.append(base="", type=ROOT_TYPE, value="", actor=SYSTEM_ACTOR, model="")

    @property
    def root(self) -> Event:
        if not self.events:
            raise GraphError("graph has no root event")
        return self.events[0]

    @property
    def head_seq(self) -> int:
        return len(self.events) - 1

    def has(self, event_id: str) -> bool:
        return event_id in self._by_id

    def get(self, event_id: str) -> Event:
        try:
            return self._by_id[event_id]
        except KeyError:
            raise GraphError(f"unknown event id {event_id}") from None

    def children(self, base_id: str, type: str | None = None) -> list[Event]:
        """Events whose base is base_id, in append order; type matches case-insensitively."""
        rows = self._children.get(base_id, [])
        if type is None:
            return list(rows)
        wanted = type.lower()
        return [e for e in rows if e.type_lower == wanted]

    def latest_child(self, base_id: str, type: str) -> Optional[Event]:
        rows = self.children(base_id, type)
        return rows[-1] if rows else None

    def of_type(self, type: str) -> list[Event]:
        return list(self._by_type_lower.get(type.lower(), []))

    def append(
        self,
        *,
        base: str,
        type: str,
        value: Value,
        actor: str,
        model: str,
        cause: Iterable[str] = (),
    ) -> Event:
        """Create, hash and store a new event; timestamp comes from the clock."""
        cause = tuple(cause)
        if self.events:
            if base == "":
                raise GraphError("only the root event may have an empty base")
            if base not in self._by_id:
                raise GraphError(f"base {base} not in graph")
            for c in cause:
                if c not in self._by_id:
                    raise GraphError(f"cause {c} not in graph")
        timestamp = self.clock.now()
        event_id = hash_event(base, type, value, actor, model, cause, timestamp)
        if event_id in self._by_id:
            raise GraphError(f"event id collision: {event_id}")
        event = Event(
            id=event_id,
            base=base,
            type=type,
            value=value,
            actor=actor,
            cause=cause,
            model=model,
            timestamp=timestamp,
            seq=len(self.events),
        )
        self._index(event)
        return event

    def append_imported(
        self,
        *,
        id: str,
        base: str,
        type: str,
        value: Value,
        actor: str,
        model: str,
        cause: tuple[str, ...],
        timestamp: datetime,
    ) -> Event:
        """Store an event read from a dump. The given id must recompute exactly."""
        recomputed = hash_event(base, type, value, actor, model, cause, timestamp)
        if recomputed != id:
            raise GraphError(f"id {id} does not match content hash {recomputed}")
        if id in self._by_id:
            raise GraphError(f"duplicate event id {id}")
        if self.events:
            if base not in self._by_id:
                raise GraphError(f"base {base} not in graph")
            for c in cause:
                if c not in self._by_id:
                    raise GraphError(f"cause {c} not in graph")
        elif base != "":
            raise GraphError("first event must be the root (empty base)")
        event = Event(
            id=id,
            base=base,
            type=type,
            value=value,
            actor=actor,
            cause=cause,
            model=model,
            timestamp=timestamp,
            seq=len(self.events),
        )
        self._index(event)
        return event

    def _index(self, event: Event) -> None:
        self.events.append(event)
        self._by_id[event.id] = event
        if event.base:
            self._children.setdefault(event.base, []).append(event)
        self._by_type_lower.setdefault(event.type_lower, []).append(event)

    def latest_reification(
        self, node_id: str, prop: str, max_seq: int | None = None
    ) -> Optional[Event]:
        """Most recent event of the given property type under node_id."""
        best = None
        for e in self.children(node_id, prop):
            if max_seq is not None and e.seq > max_seq:
                continue
            best = e
        return best

    def truncate(self, length: int) -> None:
        """Drop every event with seq >= length; undoes a staged batch."""
        while len(self.events) > length:
            event = self.events.pop()
            del self._by_id[event.id]
            if event.base:
                rows = self._children[event.base]
                rows.pop()
                if not rows:
                    del self._children[event.base]
            rows = self._by_type_lower[event.type_lower]
            rows.pop()
            if not rows:
                del self._by_type_lower[event.type_lower]

    def owner_instance(self, event: Event) -> Optional[Event]:
        """The Instance event this reification belongs to, via base links."""
        node = event
        while node is not None:
            if node.type_lower == "instance":
                return node
            if not node.base or node.base not in self._by_id:
                return None
            node = self._by_id[node.base]
        return None

    def verify(self) -> VerificationReport:
        """Recheck every stored event's hash and structural links."""
        from .dump import events_to_records, verify_records

        return verify_records(events_to_records(self.events))
