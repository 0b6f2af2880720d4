"""Timestamp sources for event creation.

The engine asks a clock for every new event's timestamp. SystemClock is the
normal wall-clock path; FixedClock makes runs reproducible by handing out a
deterministic, strictly increasing series so two events never collide on
the same (otherwise identical) hash input.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone


class SystemClock:
    """Wall clock, truncated to millisecond precision."""

    def now(self) -> datetime:
        dt = datetime.now(timezone.utc)
        return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


class FixedClock:
    """Deterministic clock: starts at a given instant, each call adds 1 ms."""

    def __init__(self, start: datetime | str = "2024-01-01T00:00:00.000Z") -> None:
        if isinstance(start, str):
            from .values import parse_instant

            start = parse_instant(start)
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        self._next = start.astimezone(timezone.utc)

    def now(self) -> datetime:
        current = self._next
        self._next = current + timedelta(milliseconds=1)
        return current
