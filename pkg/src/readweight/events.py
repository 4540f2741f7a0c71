"""Interaction log parsing, validation, and streaming.

The on-disk format is flat delimited text, one impression per line:

    user_id,item_id,timestamp,clicked,dwell_time_s

`clicked` is 0 or 1; `dwell_time_s` is decimal seconds with a `.` separator
and must be 0 whenever `clicked` is 0.  A header line is tolerated when the
caller asks for it (or in "auto" mode, where a first line starting with
``user_id`` is skipped).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator

LOG_COLUMNS = ("user_id", "item_id", "timestamp", "clicked", "dwell_time_s")
LOG_HEADER = ",".join(LOG_COLUMNS)


class LogFormatError(ValueError):
    """A line in an interaction log violates the schema."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class BadLineBudgetExceeded(LogFormatError):
    """More malformed lines than the scan was configured to skip."""


@dataclass(frozen=True, slots=True)
class InteractionEvent:
    """One impression row: who saw what, when, and for how long."""

    user_id: str
    item_id: str
    timestamp: int
    clicked: bool
    dwell_time_s: float


def parse_event(record: str, line_number: int | None = None) -> InteractionEvent:
    """Parse one log line into a validated event.

    Raises LogFormatError (tagged with ``line_number`` when given) on a wrong
    field count, non-numeric fields, negative dwell time, non-positive
    timestamp, or positive dwell time on an unclicked row.
    """
    fields = record.rstrip("\n").split(",")
    if len(fields) != 5:
        raise LogFormatError(
            f"expected 5 comma-separated fields, got {len(fields)}", line_number
        )
    user_id, item_id, ts_text, clicked_text, dwell_text = fields
    if not user_id or not item_id:
        raise LogFormatError("empty user_id or item_id", line_number)
    try:
        timestamp = int(ts_text)
    except ValueError:
        raise LogFormatError(f"non-integer timestamp {ts_text!r}", line_number) from None
    if timestamp <= 0:
        raise LogFormatError(f"timestamp must be positive, got {timestamp}", line_number)
    if clicked_text not in ("0", "1"):
        raise LogFormatError(f"clicked must be 0 or 1, got {clicked_text!r}", line_number)
    clicked = clicked_text == "1"
    try:
        dwell = float(dwell_text)
    except ValueError:
        raise LogFormatError(f"non-numeric dwell time {dwell_text!r}", line_number) from None
    if not 0.0 <= dwell < float("inf"):
        raise LogFormatError(f"dwell time must be finite and >= 0, got {dwell_text!r}", line_number)
    if not clicked and dwell > 0.0:
        raise LogFormatError(
            f"dwell time {dwell_text} on an unclicked row", line_number
        )
    return InteractionEvent(user_id, item_id, timestamp, clicked, dwell)


def serialize_event(event: InteractionEvent) -> str:
    """Render an event as its canonical log line (no trailing newline).

    Canonical number formatting: timestamps as plain integers, dwell time via
    ``repr(float)`` (shortest decimal that round-trips), clicked as 0/1.
    ``parse_event`` of the result reproduces the event exactly.
    """
    return (
        f"{event.user_id},{event.item_id},{event.timestamp},"
        f"{1 if event.clicked else 0},{event.dwell_time_s!r}"
    )


@dataclass(slots=True)
class ScanCounts:
    """Tally kept alongside a log scan."""

    total: int = 0
    skipped: int = 0


def iter_log(
    path: str | os.PathLike[str],
    *,
    header: str = "auto",
    bad_line_budget: int = 0,
    counts: ScanCounts | None = None,
) -> Iterator[InteractionEvent]:
    """Stream events from a log file in file order.

    ``header`` is one of "auto" (skip a first line that names the columns),
    "present" (always skip one line), or "absent".  Up to ``bad_line_budget``
    malformed lines are counted and skipped; the next one raises
    BadLineBudgetExceeded.  ``counts`` (if given) ends up holding the number
    of parsed and skipped lines.
    """
    if header not in ("auto", "present", "absent"):
        raise ValueError(f"unknown header mode {header!r}")
    if counts is None:
        counts = ScanCounts()
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if line_number == 1:
                stripped = line.strip()
                if header == "present" or (header == "auto" and stripped.startswith("user_id")):
                    continue
            if not line.strip():
                continue
            try:
                event = parse_event(line, line_number)
            except LogFormatError as err:
                counts.skipped += 1
                if counts.skipped > bad_line_budget:
                    raise BadLineBudgetExceeded(
                        f"bad-line budget {bad_line_budget} exceeded: {err}", line_number
                    ) from err
                continue
            counts.total += 1
            yield event


def read_log(
    path: str | os.PathLike[str],
    *,
    header: str = "auto",
    bad_line_budget: int = 0,
) -> tuple[list[InteractionEvent], ScanCounts]:
    """Eagerly read a whole log; returns (events, counts)."""
    counts = ScanCounts()
    events = list(iter_log(path, header=header, bad_line_budget=bad_line_budget, counts=counts))
    return events, counts


def write_log(
    path: str | os.PathLike[str],
    events: Iterable[InteractionEvent],
    *,
    header: bool = False,
) -> int:
    """Write events in canonical form; returns the number of rows written."""
    n = 0
    with open(path, "w", encoding="utf-8") as handle:
        if header:
            handle.write(LOG_HEADER + "\n")
        for event in events:
            handle.write(serialize_event(event) + "\n")
            n += 1
    return n
